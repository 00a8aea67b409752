use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use eggbeater::action::action_spectrum;
use eggbeater::certificate::{certify_nonautonomous, HoferCertificate};
use eggbeater::hamiltonian::{build_eggbeater, EggbeaterParams, EggbeaterSystem, Mode};
use eggbeater::orbits::{self, find_periodic_points};
use eggbeater::profile::{build_profile, ProfileConfig, ProfileH};
use eggbeater::report::{fmt_num, to_json};
use eggbeater::torus::IntVec2;
use eggbeater::Error;

const EXIT_INVALID: u8 = 2;
const EXIT_UNAVAILABLE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "eggbeater",
    version,
    about = "Eggbeater maps on the torus: orbits, action spectra and Hofer bounds"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate h, h', h'' to profile.csv.
    Profile {
        #[arg(long, default_value_t = 1000)]
        resolution: usize,
    },
    /// 1-periodic points of one class to orbits.csv.
    Orbits {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, value_parser = parse_class, allow_hyphen_values = true)]
        class: IntVec2,
    },
    /// Capped action spectrum of one class to spectrum.csv.
    Spectrum {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, value_parser = parse_class, allow_hyphen_values = true)]
        class: IntVec2,
    },
    /// Non-autonomy certificate to certificate.json.
    Certify {
        #[command(flatten)]
        system: SystemArgs,
    },
    /// One certificate per A plus summary.csv.
    Sweep {
        #[arg(long = "A-list", value_delimiter = ',', required = true)]
        a_list: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Surface)]
        mode: ModeArg,
        #[arg(long)]
        perturbed: bool,
    },
    /// h and h' columns for plotting to figure.csv.
    FigureData {
        #[arg(long, default_value_t = 1000)]
        resolution: usize,
    },
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long = "A")]
    a: f64,
    /// Defaults to 2A.
    #[arg(long = "B")]
    b: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Surface)]
    mode: ModeArg,
    /// Cut the fields off near q_0.
    #[arg(long)]
    perturbed: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Surface,
    Torus,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Surface => Mode::UniqueCapping,
            ModeArg::Torus => Mode::TorusMode,
        }
    }
}

fn parse_class(s: &str) -> Result<IntVec2, String> {
    let (m, n) = s.split_once(',').ok_or("expected m,n")?;
    let m = m.trim().parse().map_err(|e| format!("{e}"))?;
    let n = n.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(IntVec2::new(m, n))
}

fn profile() -> anyhow::Result<ProfileH> {
    Ok(build_profile(&ProfileConfig::default())?)
}

fn system(
    a: f64,
    b: Option<f64>,
    mode: ModeArg,
    perturbed: bool,
) -> anyhow::Result<EggbeaterSystem> {
    let mut params = EggbeaterParams::new(a).perturbed(perturbed);
    if let Some(b) = b {
        params.b = b;
    }
    Ok(build_eggbeater(params, profile()?, mode.into())?)
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_certificate(dir: &Path, name: &str, cert: &HoferCertificate) -> anyhow::Result<()> {
    let mut out = create(dir, name)?;
    out.write_all(to_json(cert)?.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("EGGBEATER_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidInput(format!("EGGBEATER_THREADS={v} is not a count")))?;
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let out = &cli.out;
    match cli.command {
        Command::Profile { resolution } => {
            let mut w = create(out, "profile.csv")?;
            profile()?.write_csv(resolution, &mut w)?;
            w.flush()?;
        }
        Command::FigureData { resolution } => {
            let h = profile()?;
            let mut w = create(out, "figure.csv")?;
            writeln!(w, "t,h,h1")?;
            for [t, v, d, _] in h.table(resolution) {
                writeln!(w, "{},{},{}", fmt_num(t), fmt_num(v), fmt_num(d))?;
            }
            w.flush()?;
        }
        Command::Orbits { system: s, class } => {
            let sys = system(s.a, s.b, s.mode, s.perturbed)?;
            let search = find_periodic_points(&sys, class)?;
            let mut w = create(out, "orbits.csv")?;
            orbits::write_csv(&search.orbits, &mut w)?;
            w.flush()?;
            for (seed, why) in &search.failed_seeds {
                eprintln!("seed ({}, {}) failed: {why}", seed.x, seed.y);
            }
            println!("{} orbits in class {class}", search.orbits.len());
        }
        Command::Spectrum { system: s, class } => {
            let sys = system(s.a, s.b, s.mode, s.perturbed)?;
            let spectrum = action_spectrum(&sys, class)?;
            let mut w = create(out, "spectrum.csv")?;
            spectrum.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Certify { system: s } => {
            let sys = system(s.a, s.b, s.mode, s.perturbed)?;
            let cert = certify_nonautonomous(&sys)?;
            write_certificate(out, "certificate.json", &cert)?;
            println!(
                "lower bound {} (enumerated {}), upper bound {}",
                cert.paper_lower_bound, cert.enumerated_lower_bound, cert.upper_bound
            );
        }
        Command::Sweep {
            a_list,
            mode,
            perturbed,
        } => {
            let pool = thread_pool()?;
            let results: Vec<anyhow::Result<HoferCertificate>> = pool.install(|| {
                a_list
                    .par_iter()
                    .map(|&a| {
                        let cert = certify_nonautonomous(&system(a, None, mode, perturbed)?)?;
                        write_certificate(out, &format!("certificate_A{a}.json"), &cert)?;
                        Ok(cert)
                    })
                    .collect()
            });
            let mut w = create(out, "summary.csv")?;
            writeln!(w, "A,lower,upper")?;
            let mut first_err = None;
            for (a, r) in a_list.iter().zip(results) {
                match r {
                    Ok(c) => writeln!(
                        w,
                        "{},{},{}",
                        fmt_num(*a),
                        fmt_num(c.enumerated_lower_bound),
                        fmt_num(c.upper_bound)
                    )?,
                    Err(e) => {
                        eprintln!("A = {a}: {e:#}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            w.flush()?;
            if let Some(e) = first_err {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidInput(_)
            | Error::InvalidParams(_)
            | Error::InvalidProfile { .. }
            | Error::InvalidWrap { .. }
            | Error::ClassMismatch { .. }
            | Error::NonIsolated(_),
        ) => EXIT_INVALID,
        Some(
            Error::CertificateUnavailable(_)
            | Error::InsufficientSpectrum(_)
            | Error::IncompleteEnumeration { .. },
        ) => EXIT_UNAVAILABLE,
        Some(
            Error::IntegrationFailure(_) | Error::BrokenLift { .. } | Error::CappingThroughDisk,
        ) => EXIT_NUMERICAL,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
