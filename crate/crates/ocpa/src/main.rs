use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ocpa::experiments::fmt_num;
use ocpa::presets::{load_preset, preset_text, PRESETS};
use ocpa::{run, LoadedConfig, RunOptions, TableFormat};

/// Run one experiment from a configuration file or a named preset.
#[derive(Parser, Debug)]
#[command(name = "ocpa", version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("OCPA_GIT_DESCRIBE"), ")"))]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset; see --list-presets.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override the base seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (default: the configured one, else results/<experiment>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, value_name = "N", default_value_t = 0)]
    threads: usize,
    /// Table format.
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    /// List built-in presets and exit.
    #[arg(long)]
    list_presets: bool,
    /// Print a preset's TOML and exit.
    #[arg(long, value_name = "NAME")]
    print_preset: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_presets {
        for (name, _) in PRESETS {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    if let Some(name) = &cli.print_preset {
        return match preset_text(name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown preset `{name}`");
                ExitCode::from(2)
            }
        };
    }

    let loaded = match (&cli.config, &cli.preset) {
        (Some(path), _) => match std::fs::read_to_string(path) {
            Ok(text) => LoadedConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display())),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(4);
            }
        },
        (None, Some(name)) => load_preset(name).map_err(|e| e.to_string()),
        (None, None) => Err("one of --config or --preset is required".to_owned()),
    };
    let mut loaded = match loaded {
        Ok(l) => l,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        loaded.config.seed = seed;
    }

    let opts = RunOptions {
        out_dir: cli.out,
        threads: cli.threads,
        format: cli.format,
        dry: false,
    };
    match run(&loaded, &opts) {
        Ok(report) => {
            for c in &report.outcome.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("{tag} {} = {} (band {})", c.name, fmt_num(c.value), c.band);
            }
            println!("wrote {}", report.out_dir.join("summary.json").display());
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
