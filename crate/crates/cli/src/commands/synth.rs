//! `gduplan synth` — write a synthetic GDU history and population list.

use crate::commands::write_json;
use crate::manifest::Manifest;
use crate::Cli;
use clap::Args;
use gduplan::ingest::{generate_synthetic_instance, write_gdu_history, write_populations, SyntheticSpec};
use gduplan::Result;

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    /// Problem shape: 1 = capacitated consistency, 2 = minimum capacity.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub case: u8,

    /// Number of seed populations to generate.
    #[arg(long, default_value_t = 500)]
    pub populations: usize,
}

pub fn run(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let mut manifest = Manifest::new(&["synth"], cli.seed);
    let spec = match args.case {
        1 => SyntheticSpec::case1_defaults(args.populations, cli.seed),
        _ => SyntheticSpec::case2_defaults(args.populations, cli.seed),
    };
    manifest.param("case", args.case);
    manifest.param("spec", &spec);

    let instance = generate_synthetic_instance(&spec)?;

    let mut history = Vec::new();
    write_gdu_history(std::slice::from_ref(&instance.history), &mut history)?;
    manifest.emit(&cli.out, "history.csv", &history)?;

    let mut populations = Vec::new();
    write_populations(&instance.populations, &mut populations)?;
    manifest.emit(&cli.out, "populations.csv", &populations)?;

    write_json(&mut manifest, &cli.out, "synth_spec.json", &spec)?;
    manifest.write(&cli.out)?;
    println!(
        "wrote {} populations and {} history days to {}",
        instance.populations.len(),
        instance.history.len(),
        cli.out.display()
    );
    Ok(())
}
