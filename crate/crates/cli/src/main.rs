use clap::Parser;

use regularity_cli::args::Cli;
use regularity_cli::execute;

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
