use clap::Parser;
use relsynth::analysis::profile::TrackingAllocator;

// Lets `profile` report heap peaks instead of process RSS.
#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

fn main() {
    let cli = relsynth_cli::Cli::parse();
    std::process::exit(relsynth_cli::run(cli));
}
