use aquaflow::gateway::{run_cli, CliContext};

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let ctx = CliContext::from_process();
    let code = run_cli(std::env::args_os(), &ctx, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
