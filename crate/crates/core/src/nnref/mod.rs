//! Forward-only f32 reference implementations of the transformer
//! components: channel-transposed attention, the gated feed-forward
//! network, transformer blocks, and 2-D/3-D reconstructors. Weights are
//! seeded, never trained.

mod adapters;
mod block;
mod ctsa;
mod extractor;
mod gfn;
mod layers;
mod reconstruct;
mod tensor;
mod weights;

pub use adapters::{NnConfig, NnMeasurer, NnRestorer};
pub use block::{transformer_block_forward, BlockWeights, GFN_EXPANSION};
pub use ctsa::{ctsa_attention, ctsa_forward, CtsaWeights};
pub use extractor::{FeatureExtractor3d, PriorInjection};
pub use gfn::{gfn_forward, GfnWeights};
pub use layers::{avg_pool, gelu, upsample_nearest, Conv1x1, Conv3dDown, DepthwiseConv3, LayerNorm};
pub use reconstruct::{FieldMaps, Reconstruct2dConfig, Reconstruct3dConfig, Reconstructor2d, Reconstructor3d, WINDOW};
pub use tensor::Tensor4;
pub use weights::{
    load_reconstruct2d, load_reconstruct3d, save_reconstruct2d, save_reconstruct3d, Parameters, TensorEntry,
    WeightManifest, MANIFEST_FILE,
};
