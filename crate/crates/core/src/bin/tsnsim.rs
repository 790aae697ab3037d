use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use factory_tsn::report::{self, REPORT_JSON};
use factory_tsn::scenario::{expand_preset, with_overrides, Override, PresetId, ScenarioConfig};
use factory_tsn::sim::{run, RunResult};
use factory_tsn::sweep::{sweep, SweepBase};
use factory_tsn::{Result, SimError, SimTime};

/// Discrete-event simulator for TSN smart-factory networks.
#[derive(Parser)]
#[command(name = "tsnsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario without running it.
    Validate(Scenario),
    /// Run one scenario and write its reports.
    Run {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        output: Output,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[command(flatten)]
        scenario: Scenario,
        /// Sweepable parameter, e.g. cbs_fraction.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Diff the application tables of two reports (files or run directories).
    Compare {
        left: PathBuf,
        right: PathBuf,
        /// Exit with status 1 when the reports differ.
        #[arg(long)]
        check: bool,
    },
    /// List presets or print one as TOML.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Expand {
        name: PresetId,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<Override>,
    },
}

#[derive(Args)]
struct Scenario {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<PresetId>,
    /// Scenario TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<Override>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated time, e.g. 5s or 500ms.
    #[arg(long)]
    horizon: Option<SimTime>,
}

#[derive(Args)]
struct Output {
    #[arg(long, env = "TSNSIM_OUT", default_value = "tsnsim-out")]
    out: PathBuf,
    /// Exit with status 1 unless every requirement passes.
    #[arg(long)]
    check: bool,
}

impl Scenario {
    fn overrides(&self) -> Vec<Override> {
        let mut all = self.overrides.clone();
        if let Some(s) = self.seed {
            all.push(Override { key: "seed".into(), value: s.to_string() });
        }
        if let Some(h) = self.horizon {
            all.push(Override { key: "horizon".into(), value: h.to_string() });
        }
        all
    }

    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.preset, &self.config) {
            (Some(p), _) => expand_preset(*p, &self.overrides()),
            (None, Some(path)) => {
                // an unreadable scenario file is a configuration problem, not a runtime one
                let cfg = ScenarioConfig::load(path).map_err(|e| match e {
                    SimError::Io { .. } => SimError::config(e.to_string()),
                    e => e,
                })?;
                with_overrides(cfg, &self.overrides())
            }
            (None, None) => Err(SimError::config("give --preset or --config")),
        }
    }

    fn sweep_base(&self) -> Result<SweepBase> {
        match self.preset {
            Some(p) => Ok(SweepBase::Preset(p, self.overrides())),
            None => Ok(SweepBase::Config(Box::new(self.load()?))),
        }
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("-".into(), |v| format!("{v:.digits$}"))
}

fn print_run(r: &RunResult) {
    println!("scenario {} seed {} horizon {} events {}", r.scenario, r.seed, r.horizon, r.events_executed);
    println!("{:<24} {:>10} {:>10} {:>9} {:>12} {:>12}", "app", "sent", "received", "rdr %", "mean ms", "max ms");
    for a in &r.apps {
        println!(
            "{:<24} {:>10} {:>10} {:>9} {:>12} {:>12}",
            a.app.name(),
            a.frames_sent,
            a.frames_received,
            opt(a.rdr_percent, 3),
            opt(a.mean_delay_ms, 4),
            opt(a.max_delay_ms, 4)
        );
    }
    for q in &r.requirements {
        println!("requirement {:<20} rdr {:<8} delay {:<8}", q.app.name(), q.rdr.as_str(), q.delay.as_str());
    }
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(REPORT_JSON)
    } else {
        p.to_path_buf()
    }
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate(s) => {
            let cfg = s.load()?;
            println!("{}: ok", cfg.name);
            Ok(0)
        }
        Command::Run { scenario, output } => {
            let cfg = scenario.load()?;
            let r = run(&cfg)?;
            print_run(&r);
            for p in report::write_run(&output.out, &cfg, &r)? {
                println!("wrote {}", p.display());
            }
            Ok(u8::from(output.check && !r.requirements_met()))
        }
        Command::Sweep { scenario, param, values, output } => {
            let s = sweep(&scenario.sweep_base()?, &param, &values)?;
            for row in &s.rows {
                println!("{}={}", s.parameter, row.value);
                print_run(&row.result);
            }
            for p in report::write_series(&output.out, &s)? {
                println!("wrote {}", p.display());
            }
            Ok(u8::from(output.check && !s.rows.iter().all(|r| r.result.requirements_met())))
        }
        Command::Compare { left, right, check } => {
            let l = report::load_report(&report_path(&left))?;
            let r = report::load_report(&report_path(&right))?;
            let diffs = report::compare_reports(&l, &r)?;
            if diffs.is_empty() {
                println!("application tables identical");
            }
            for d in &diffs {
                println!("{:<24} {:<22} {} -> {}", d.app, d.metric, d.left, d.right);
            }
            Ok(u8::from(check && !diffs.is_empty()))
        }
        Command::Presets { action: PresetAction::List } => {
            for p in PresetId::ALL {
                println!("{:<10} {}", p.name(), p.description());
            }
            Ok(0)
        }
        Command::Presets { action: PresetAction::Expand { name, overrides } } => {
            print!("{}", expand_preset(name, &overrides)?.to_toml());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("tsnsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
