use clap::Parser;

fn main() {
    let code = turbkit_cli::run(turbkit_cli::Cli::parse());
    std::process::exit(code as i32);
}
