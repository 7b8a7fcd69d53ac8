use clap::Parser;
use sgkit::commands::{run, Cli};
use sgkit::error::exit;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("sgkit: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
