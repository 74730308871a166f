//! Thin command-line front end over the library: `run` executes a configured
//! experiment, `compare` tabulates finished runs, `gen` writes synthetic
//! datasets to CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use oebe::data::{gen_friedman, gen_interleaved_clusters, FriedmanVariant};
use oebe::experiment::{self, EnsembleMode, ExperimentConfig};

const USAGE: &str = "\
usage:
  oebe run --config <file> [--seed N] [--out DIR] [--mode oebe|doebe|sdoebe|edoebe]
           [--sigma-rw X] [--checkpoint-at N] [--resume FILE] [--report]
  oebe compare <summary.json>...
  oebe gen --variant friedman1|friedman2|clusters --n N --out <file.csv>
           [--seed N] [--noise X] [--ordered]

The default output directory comes from OEBE_OUT_DIR when --out is absent.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("compare") => cmd_compare(&args[1..]),
        Some("gen") => cmd_gen(&args[1..]),
        Some("--help") | Some("-h") | None => {
            println!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        Some(other) => Err(format!("unknown subcommand '{other}'\n{USAGE}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

struct Flags {
    values: Vec<(String, Option<String>)>,
    positional: Vec<String>,
}

impl Flags {
    fn parse(args: &[String], takes_value: &[&str], boolean: &[&str]) -> Result<Self, String> {
        let mut values = Vec::new();
        let mut positional = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            if let Some(name) = arg.strip_prefix("--") {
                if boolean.contains(&name) {
                    values.push((name.to_string(), None));
                } else if takes_value.contains(&name) {
                    i += 1;
                    let value = args
                        .get(i)
                        .ok_or_else(|| format!("--{name} expects a value"))?;
                    values.push((name.to_string(), Some(value.clone())));
                } else {
                    return Err(format!("unknown flag --{name}"));
                }
            } else {
                positional.push(arg.clone());
            }
            i += 1;
        }
        Ok(Self { values, positional })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.values
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .and_then(|(_, v)| v.as_deref())
    }

    fn has(&self, name: &str) -> bool {
        self.values.iter().any(|(n, _)| n == name)
    }
}

fn cmd_run(args: &[String]) -> Result<(), String> {
    let flags = Flags::parse(
        args,
        &[
            "config",
            "seed",
            "out",
            "mode",
            "sigma-rw",
            "checkpoint-at",
            "resume",
        ],
        &["report"],
    )?;
    let config_path = flags
        .get("config")
        .ok_or_else(|| "run requires --config <file>".to_string())?;
    let mut config =
        ExperimentConfig::from_path(&PathBuf::from(config_path)).map_err(|e| e.to_string())?;

    if let Some(seed) = flags.get("seed") {
        config.seed = seed.parse().map_err(|_| format!("bad --seed '{seed}'"))?;
    }
    if let Some(out) = flags.get("out") {
        config.out_dir = Some(PathBuf::from(out));
    }
    if let Some(mode) = flags.get("mode") {
        config.mode = EnsembleMode::parse(mode).map_err(|e| e.to_string())?;
    }
    if let Some(sigma) = flags.get("sigma-rw") {
        let value: f64 = sigma
            .parse()
            .map_err(|_| format!("bad --sigma-rw '{sigma}'"))?;
        if config.sigma_rw_levels.is_empty() {
            config.sigma_rw_levels = vec![value];
        } else {
            config.sigma_rw_levels[0] = value;
        }
    }
    if let Some(at) = flags.get("checkpoint-at") {
        config.checkpoint_at = Some(
            at.parse()
                .map_err(|_| format!("bad --checkpoint-at '{at}'"))?,
        );
    }

    let artifacts = if let Some(checkpoint) = flags.get("resume") {
        experiment::resume(&config, &PathBuf::from(checkpoint)).map_err(|e| e.to_string())?
    } else {
        experiment::run(&config).map_err(|e| e.to_string())?
    };

    println!("metrics: {}", artifacts.metrics_path.display());
    println!("summary: {}", artifacts.summary_path.display());
    if flags.has("report") {
        let table = experiment::compare(std::slice::from_ref(&artifacts.summary_path))
            .map_err(|e| e.to_string())?;
        print!("{table}");
    }
    Ok(())
}

fn cmd_compare(args: &[String]) -> Result<(), String> {
    let flags = Flags::parse(args, &[], &[])?;
    if flags.positional.is_empty() {
        return Err("compare requires at least one summary file".into());
    }
    let paths: Vec<PathBuf> = flags.positional.iter().map(PathBuf::from).collect();
    let table = experiment::compare(&paths).map_err(|e| e.to_string())?;
    print!("{table}");
    Ok(())
}

fn cmd_gen(args: &[String]) -> Result<(), String> {
    let flags = Flags::parse(
        args,
        &["variant", "n", "out", "seed", "noise"],
        &["ordered"],
    )?;
    let variant = flags
        .get("variant")
        .ok_or_else(|| "gen requires --variant".to_string())?;
    let n: usize = flags
        .get("n")
        .ok_or_else(|| "gen requires --n".to_string())?
        .parse()
        .map_err(|_| "bad --n".to_string())?;
    let out = flags
        .get("out")
        .ok_or_else(|| "gen requires --out <file.csv>".to_string())?;
    let seed: u64 = flags
        .get("seed")
        .unwrap_or("0")
        .parse()
        .map_err(|_| "bad --seed")?;
    let noise: Option<f64> = match flags.get("noise") {
        Some(v) => Some(v.parse().map_err(|_| format!("bad --noise '{v}'"))?),
        None => None,
    };

    let records = match variant {
        "friedman1" => gen_friedman(
            FriedmanVariant::One,
            n,
            noise.unwrap_or(oebe::data::FRIEDMAN1_NOISE_STD),
            seed,
        ),
        "friedman2" => gen_friedman(
            FriedmanVariant::Two,
            n,
            noise.unwrap_or(oebe::data::FRIEDMAN2_NOISE_STD),
            seed,
        ),
        "clusters" => {
            gen_interleaved_clusters(n, noise.unwrap_or(0.15), flags.has("ordered"), seed)
        }
        other => return Err(format!("unknown variant '{other}'")),
    };

    let dim = records.first().map_or(0, |r| r.x.len());
    let mut csv = String::new();
    for d in 0..dim {
        csv.push_str(&format!("x{d},"));
    }
    csv.push_str("y\n");
    for r in &records {
        for v in &r.x {
            csv.push_str(&format!("{v},"));
        }
        csv.push_str(&format!("{}\n", r.y));
    }
    std::fs::write(out, csv).map_err(|e| format!("{out}: {e}"))?;
    println!("wrote {n} records to {out}");
    Ok(())
}
