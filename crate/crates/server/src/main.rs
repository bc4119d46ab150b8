use clap::Parser;
use dpp_server::Config;

/// Serve dataflow programs over HTTP with a TCP data plane per run.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(flatten)]
    config: Config,
}

fn main() {
    let cli = Cli::parse();
    let workers = cli.config.workers();
    match dpp_server::spawn(cli.config) {
        Ok(server) => {
            println!("listening on {} with {workers} worker(s)", server.url());
            if let Err(e) = server.wait() {
                eprintln!("server error: {e}");
                std::process::exit(2);
            }
        }
        Err(e) => {
            eprintln!("cannot start server: {e}");
            std::process::exit(2);
        }
    }
}
