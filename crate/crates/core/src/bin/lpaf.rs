use clap::Parser;

use lpaf::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("LPAF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: LPAF_THREADS ignored: {e}");
        }
    }
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
