mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use amo_core::cocycle::{lyapunov_avg, CocycleParams, Frequency};
use amo_core::diophantine::{build_liouville, build_x_window, pq_intervals, pq_member, ContinuedFraction, PqWindow};
use amo_core::export::{band_rows, butterfly, butterfly_rows, butterfly_svg, write_csv, write_json, x_rows, PqExport};
use amo_core::periodic::BandSpectrum;
use amo_core::renorm::{avera_check, orbit_deviation, OrbitExperiment};
use amo_core::thouless::{sample_energies, thouless_compare, ThoulessSettings};
use amo_core::verify::{run_all, run_one, suite_ids, SuiteConfig, VerificationReport};
use amo_core::{AmoError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "amo", version, about = "Almost Mathieu operator: band spectra, IDS, Lyapunov exponents, Diophantine sets")]
struct Cli {
    /// Flat key=value file; keys are flag names without dashes.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0: all cores). AMO_THREADS takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bands of Σ and σ for one rational frequency.
    Bands(Fraction),
    /// Bands for every reduced p/q with q ≤ q-max.
    Butterfly {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        q_max: u64,
        /// Also write an SVG rendering here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Integrated density of states (and its derivative inside Σ).
    Ids {
        #[command(flatten)]
        frac: Fraction,
        #[arg(long = "E", value_delimiter = ',', required = true, allow_hyphen_values = true)]
        energies: Vec<f64>,
    },
    /// Lyapunov exponent by transfer matrices; optionally against the Thouless formula.
    Lyapunov {
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        freq: FreqSpec,
        #[arg(long = "E", value_delimiter = ',', allow_hyphen_values = true)]
        energies: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 64)]
        m: usize,
        /// Compare with the Thouless integral (rational frequencies only).
        #[arg(long)]
        thouless: bool,
        /// Number of evenly spaced energies when --E is absent.
        #[arg(long, default_value_t = 10)]
        energies_count: usize,
    },
    /// Membership of rotation numbers in P_q, or the interval union.
    Pq {
        #[command(flatten)]
        window: WindowSpec,
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        /// Emit the exact interval union instead.
        #[arg(long)]
        intervals: bool,
    },
    /// The set X of energies whose averaged rotation number lies in P_q.
    XSet {
        #[command(flatten)]
        frac: Fraction,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        b_lo: Option<u64>,
        #[arg(long)]
        b_hi: Option<u64>,
    },
    /// One long-orbit experiment in the gauge of the periodic fixed point.
    Orbit {
        #[command(flatten)]
        frac: Fraction,
        #[arg(long = "E", allow_hyphen_values = true)]
        energy: f64,
        #[arg(long)]
        b: u64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Frequency offset from p/q.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta: f64,
        /// Odd numerator paired with b.
        #[arg(long)]
        a: Option<u64>,
        /// Fine scale for the averaging check (defaults to p/q).
        #[arg(long)]
        fine_p: Option<u64>,
        #[arg(long)]
        fine_q: Option<u64>,
    },
    /// Verification suite or one of its reports.
    Verify {
        /// `all` or a report id.
        #[arg(default_value = "all")]
        which: String,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct Fraction {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    p: u64,
    #[arg(long)]
    q: u64,
}

#[derive(Args, Debug, Clone)]
struct FreqSpec {
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    q: Option<u64>,
    /// Partial quotients a_1, a_2, …
    #[arg(long, value_delimiter = ',')]
    quotients: Vec<u64>,
    /// Target exponent of a built Liouville number.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 4)]
    terms: usize,
}

impl FreqSpec {
    fn resolve(&self) -> Result<Frequency> {
        match (self.p, self.q, self.quotients.is_empty(), self.beta) {
            (Some(p), Some(q), true, None) => Frequency::rational(p, q),
            (None, None, false, None) => Ok(Frequency::Real(ContinuedFraction::from_quotients(&self.quotients)?.value()?)),
            (None, None, true, Some(b)) => Ok(Frequency::Real(build_liouville(b, self.terms)?.value()?)),
            _ => Err(AmoError::InvalidParameter("give exactly one of --p/--q, --quotients, --beta".into())),
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct WindowSpec {
    #[arg(long)]
    q: u64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    b_lo: Option<u64>,
    #[arg(long)]
    b_hi: Option<u64>,
}

impl WindowSpec {
    fn resolve(&self) -> Result<PqWindow> {
        window(self.q, self.c, self.b_lo, self.b_hi)
    }
}

fn window(q: u64, c: Option<f64>, b_lo: Option<u64>, b_hi: Option<u64>) -> Result<PqWindow> {
    match (c, b_lo, b_hi) {
        (Some(c), None, None) => PqWindow::new(q, c),
        (None, Some(lo), Some(hi)) => PqWindow::explicit(q, lo, hi),
        _ => Err(AmoError::InvalidParameter("give either --c or both --b-lo and --b-hi".into())),
    }
}

struct Output {
    format: Format,
    out: Option<PathBuf>,
}

impl Output {
    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn rows<T: Serialize>(&self, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Csv => write_csv(self.sink()?, rows),
            Format::Json => write_json(self.sink()?, rows),
        }
    }

    fn json<T: Serialize + ?Sized>(&self, v: &T) -> Result<()> {
        write_json(self.sink()?, v)
    }
}

fn io_err(p: &std::path::Path, e: io::Error) -> AmoError {
    AmoError::InvalidParameter(format!("{}: {e}", p.display()))
}

#[derive(Serialize)]
struct IdsRow {
    #[serde(rename = "E")]
    energy: f64,
    #[serde(rename = "N")]
    n: f64,
    density: Option<f64>,
}

#[derive(Serialize)]
struct LyapunovRow {
    #[serde(rename = "E")]
    energy: f64,
    #[serde(rename = "L")]
    l: f64,
}

#[derive(Serialize)]
struct MemberRow {
    rho: f64,
    member: bool,
    a: Option<u64>,
    b: Option<u64>,
}

#[derive(Serialize)]
struct OrbitRecord {
    lambda: f64,
    p: u64,
    q: u64,
    alpha: f64,
    #[serde(rename = "E")]
    energy: f64,
    b: u64,
    a: Option<u64>,
    theta: f64,
    dev: f64,
    which: i8,
    epsilon: i8,
    predicted: Option<i8>,
    ratio: f64,
    lhs: f64,
    rhs: f64,
    short_circuit: bool,
    proxy: bool,
}

fn run(cli: Cli) -> Result<bool> {
    let out = Output { format: cli.format, out: cli.out.clone() };
    match cli.command {
        Command::Bands(f) => {
            let s = BandSpectrum::new(f.lambda, f.p, f.q)?;
            out.rows(&band_rows(&s))?;
            let bound = 4.0 * std::f64::consts::PI * f.lambda.powf(f.q as f64 / 2.0);
            eprintln!(
                "|Sigma| = {:.12}  |sigma| = {:.12}  |Sigma \\ sigma| = {:.3e} (bound {:.3e}: {})",
                s.sigma_measure(),
                s.inner_measure(),
                s.gap_measure(),
                bound,
                if s.gap_measure() <= bound * (1.0 + 1e-6) { "ok" } else { "violated" }
            );
        }
        Command::Butterfly { lambda, q_max, svg } => {
            let spectra = butterfly(lambda, q_max)?;
            out.rows(&butterfly_rows(&spectra))?;
            if let Some(p) = svg {
                std::fs::write(&p, butterfly_svg(lambda, &spectra)).map_err(|e| io_err(&p, e))?;
            }
        }
        Command::Ids { frac, energies } => {
            let s = BandSpectrum::new(frac.lambda, frac.p, frac.q)?;
            let rows: Vec<IdsRow> =
                energies.iter().map(|&e| IdsRow { energy: e, n: s.ids(e), density: s.ids_density(e).ok() }).collect();
            out.rows(&rows)?;
        }
        Command::Lyapunov { lambda, freq, energies, n, m, thouless, energies_count } => {
            let alpha = freq.resolve()?;
            if thouless {
                let Frequency::Rational { p, q } = alpha else {
                    return Err(AmoError::InvalidParameter("--thouless needs --p/--q".into()));
                };
                let s = BandSpectrum::new(lambda, p, q)?;
                let es = if energies.is_empty() { sample_energies(&s, energies_count) } else { energies };
                let settings = ThoulessSettings { n_cocycle: n, ..ThoulessSettings::for_period(q) };
                let r = thouless_compare(&s, &es, settings)?;
                out.rows(&r.rows)?;
                eprintln!("max |L_thouless - L_cocycle| = {:.3e} (tolerance {:.3e})", r.max_diff, r.tolerance);
            } else {
                if energies.is_empty() {
                    return Err(AmoError::InvalidParameter("--E is required".into()));
                }
                let rows: Vec<LyapunovRow> = energies
                    .iter()
                    .map(|&e| Ok(LyapunovRow { energy: e, l: lyapunov_avg(&CocycleParams::new(lambda, alpha, e)?, n, m)? }))
                    .collect::<Result<_>>()?;
                out.rows(&rows)?;
            }
        }
        Command::Pq { window, rho, intervals } => {
            let w = window.resolve()?;
            if intervals {
                out.json(&PqExport::new(&w, pq_intervals(&w)?))?;
            } else {
                if rho.is_empty() {
                    return Err(AmoError::InvalidParameter("--rho or --intervals is required".into()));
                }
                let rows: Vec<MemberRow> = rho
                    .iter()
                    .map(|&r| {
                        let m = pq_member(r, &w)?;
                        Ok(MemberRow { rho: r, member: m.is_some(), a: m.map(|x| x.a), b: m.map(|x| x.b) })
                    })
                    .collect::<Result<_>>()?;
                out.rows(&rows)?;
            }
        }
        Command::XSet { frac, c, b_lo, b_hi } => {
            let s = BandSpectrum::new(frac.lambda, frac.p, frac.q)?;
            let w = window(frac.q, c, b_lo, b_hi)?;
            let x = build_x_window(&s, &w)?;
            out.rows(&x_rows(&s, &x)?)?;
            eprintln!("|X| = {:.12}  N(X) = {:.12}", x.measure(), s.n_measure(&x));
        }
        Command::Orbit { frac, energy, b, theta, delta, a, fine_p, fine_q } => {
            let start = Instant::now();
            let alpha = if delta == 0.0 { Frequency::rational(frac.p, frac.q)? } else { Frequency::perturbed(frac.p, frac.q, delta)? };
            let mut ex = OrbitExperiment::new(frac.lambda, frac.p, frac.q, alpha, energy, b, theta);
            if let Some(a) = a {
                ex = ex.with_witness(a);
            }
            let d = orbit_deviation(&ex)?;
            let r = avera_check(&ex, fine_p.unwrap_or(frac.p), fine_q.unwrap_or(frac.q))?;
            out.json(&OrbitRecord {
                lambda: frac.lambda,
                p: frac.p,
                q: frac.q,
                alpha: alpha.value(),
                energy,
                b,
                a,
                theta,
                dev: d.dev,
                which: d.which,
                epsilon: d.epsilon,
                predicted: d.predicted,
                ratio: r.ratio,
                lhs: r.lhs,
                rhs: r.rhs,
                short_circuit: r.short_circuit,
                proxy: r.proxy,
            })?;
            eprintln!("elapsed {:.3} s", start.elapsed().as_secs_f64());
        }
        Command::Verify { which, lambda } => {
            let cfg = SuiteConfig { lambda, seed: cli.seed, ..SuiteConfig::default() };
            let reports: Vec<VerificationReport> = if which == "all" {
                run_all(&cfg)
            } else {
                let r = run_one(&cfg, &which).ok_or_else(|| {
                    AmoError::InvalidParameter(format!("unknown report '{which}'; known: all, {}", suite_ids().join(", ")))
                })?;
                vec![r]
            };
            out.json(&reports)?;
            for r in &reports {
                eprintln!("{:<28} {:?} ({:.2} s)", r.lemma_id, r.status, r.runtime.as_secs_f64());
            }
            return Ok(reports.iter().all(|r| r.pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match config::expand(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("amo: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let threads = config::thread_count(cli.threads, std::env::var("AMO_THREADS").ok().as_deref());
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("amo: thread pool: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("amo: {e}");
            ExitCode::from(1)
        }
    }
}
