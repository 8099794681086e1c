use std::fs::File;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use codesign_core::bootstrap::{screen, ResamplingPlan, ScreenAdjust, Scheme, ScreeningTable, DEFAULT_OUTER_REPS};
use codesign_core::data::Dataset;
use codesign_core::family::{HypothesisKind, INTERSECTION_ID, MODEL_FIT_ID};
use codesign_core::graph::CausalGraph;
use codesign_core::multiplicity::{adjust, IntersectionMethod, Method, PValueEntry, PValueVector, DEFAULT_C0, DEFAULT_Q};
use codesign_core::session::{compute_iteration, fmt_g, write_fit_report, Settings};
use codesign_core::toy::generate_toy_dataset;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "codesign", version, about = "Causal graph co-design workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdjustArg {
    Bh,
    By,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bh,
    By,
    Wbh,
    Fdcr,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntersectionArg {
    Simes,
    Fisher,
}

impl From<IntersectionArg> for IntersectionMethod {
    fn from(a: IntersectionArg) -> Self {
        match a {
            IntersectionArg::Simes => IntersectionMethod::WeightedSimes,
            IntersectionArg::Fisher => IntersectionMethod::Fisher,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the wind-turbine toy dataset.
    Toygen {
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; `-` for stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Correlation matrix and permutation-screened pairwise p-values.
    Screen {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_OUTER_REPS)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = AdjustArg::Bh)]
        adjust: AdjustArg,
        /// Directory for `correlations.csv` and `screening.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One co-design iteration: fit, build the hypothesis family, adjust,
    /// and write `report.json`, `effects.dot` and `covariances.dot`.
    Fit {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_Q)]
        q: f64,
        #[arg(long, default_value_t = 0.05)]
        delta_rho: f64,
        /// Bootstrap replicates for the covariance equivalence tests.
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = IntersectionArg::Simes)]
        intersection: IntersectionArg,
        #[arg(long, default_value_t = DEFAULT_C0)]
        c0: f64,
        #[arg(long, default_value = "")]
        note: String,
    },
    /// Adjust a table of p-values (`id,p[,weight]` as CSV, or a JSON array).
    Adjust {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Bh)]
        method: MethodArg,
        #[arg(long, default_value_t = DEFAULT_Q)]
        q: f64,
        #[arg(long, default_value_t = DEFAULT_C0)]
        c0: f64,
        #[arg(long, value_enum, default_value_t = IntersectionArg::Simes)]
        intersection: IntersectionArg,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "CODESIGN_DATA_DIR", default_value = "codesign-data")]
        data_dir: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Toygen { n, seed, out } => toygen(n, seed, &out),
        Command::Screen { data, reps, seed, adjust, out } => run_screen(&data, reps, seed, adjust, out.as_deref()),
        Command::Fit { graph, data, out, q, delta_rho, reps, seed, intersection, c0, note } => {
            let settings = Settings {
                q,
                delta_rho,
                reps,
                master_seed: seed,
                intersection_method: intersection.into(),
                c0,
            };
            fit(&graph, &data, &out, &settings, &note)
        }
        Command::Adjust { input, method, q, c0, intersection } => run_adjust(&input, method, q, c0, intersection.into()),
        Command::Serve { port, data_dir } => {
            let addr = SocketAddr::from(([0, 0, 0, 0], port));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(codesign_server::serve(addr, &data_dir))
                .with_context(|| format!("serving on {addr}"))
        }
    }
}

fn toygen(n: usize, seed: u64, out: &Path) -> Result<()> {
    let data = generate_toy_dataset(n, seed)?;
    if out == Path::new("-") {
        data.write_csv(io::stdout().lock())?;
    } else {
        data.save_csv(out).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn load_data(path: &Path) -> Result<Dataset> {
    Dataset::load_csv(path, None).with_context(|| format!("reading {}", path.display()))
}

fn run_screen(path: &Path, reps: usize, seed: u64, adjust: AdjustArg, out: Option<&Path>) -> Result<()> {
    let data = load_data(path)?;
    let plan = ResamplingPlan {
        reps_outer: reps,
        reps_inner: 0,
        master_seed: seed,
        scheme: Scheme::Permutation,
    };
    plan.validate()?;
    let adjust = match adjust {
        AdjustArg::Bh => ScreenAdjust::Bh,
        AdjustArg::By => ScreenAdjust::By,
    };
    let table = screen(&data, &plan, adjust)?;
    print_screen(&table, &mut io::stdout().lock())?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_screen_csv(&table, dir)?;
    }
    Ok(())
}

fn print_screen(table: &ScreeningTable, out: &mut impl Write) -> io::Result<()> {
    let width = table.names.iter().map(String::len).max().unwrap_or(0);
    writeln!(out, "Correlations")?;
    write!(out, "{:width$}", "")?;
    for name in &table.names {
        write!(out, " {name:>width$}")?;
    }
    writeln!(out)?;
    for (name, row) in table.names.iter().zip(&table.corr) {
        write!(out, "{name:width$}")?;
        for v in row {
            write!(out, " {:>width$}", format!("{v:.3}"))?;
        }
        writeln!(out)?;
    }
    writeln!(out)?;
    writeln!(out, "Adjusted p-values ({:?}, {} permutations)", table.adjust, table.reps)?;
    for r in &table.pairs {
        writeln!(
            out,
            "{:width$} {:width$} r={:>7.3} raw={:<10} adj={}",
            r.a,
            r.b,
            r.r,
            fmt_g(r.raw_p),
            fmt_g(r.adjusted_p)
        )?;
    }
    Ok(())
}

fn write_screen_csv(table: &ScreeningTable, dir: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("correlations.csv"))?;
    let mut header = vec![String::new()];
    header.extend(table.names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in table.names.iter().zip(&table.corr) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| fmt_g(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("screening.csv"))?;
    w.write_record(["a", "b", "r", "raw_p", "adjusted_p"])?;
    for r in &table.pairs {
        w.write_record([r.a.clone(), r.b.clone(), fmt_g(r.r), fmt_g(r.raw_p), fmt_g(r.adjusted_p)])?;
    }
    w.flush()?;
    Ok(())
}

fn fit(graph: &Path, data: &Path, out: &Path, settings: &Settings, note: &str) -> Result<()> {
    let text = std::fs::read_to_string(graph).with_context(|| format!("reading {}", graph.display()))?;
    let graph = CausalGraph::from_json(&text)?;
    let data = load_data(data)?;
    let snapshot = compute_iteration(1, &graph, &data, settings, note, chrono::Utc::now())?;
    write_fit_report(out, &snapshot)?;
    let fam = &snapshot.family;
    let highlighted = fam.records.iter().filter(|r| r.is_highlighted(settings.q)).count();
    println!(
        "{} hypotheses ({} coefficients, {} covariance), {} rejected, {} highlighted at q={}",
        fam.records.len(),
        fam.count(HypothesisKind::Coefficient),
        fam.count(HypothesisKind::CovEquivalence),
        fam.records.iter().filter(|r| r.rejected == Some(true)).count(),
        highlighted,
        settings.q
    );
    if let Some(mf) = fam.record(MODEL_FIT_ID) {
        println!("model fit: chi2={} df={} p={}", fmt_g(snapshot.model_fit.statistic), snapshot.model_fit.df, fmt_g(mf.raw_p.unwrap_or(f64::NAN)));
    }
    println!("report written to {}", out.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
struct InputRow {
    id: String,
    p: f64,
    #[serde(default = "one")]
    weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Serialize)]
struct OutputRow {
    id: String,
    p: f64,
    weight: f64,
    adjusted_p: f64,
    rejected: bool,
}

fn read_rows(path: &Path) -> Result<Vec<InputRow>> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_reader(file)?)
    } else {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
    }
}

fn run_adjust(path: &Path, method: MethodArg, q: f64, c0: f64, intersection: IntersectionMethod) -> Result<()> {
    let rows = read_rows(path)?;
    if rows.iter().any(|r| r.id == INTERSECTION_ID) && matches!(method, MethodArg::Fdcr) {
        bail!("id `{INTERSECTION_ID}` is reserved for the intersection hypothesis");
    }
    let pv = PValueVector::new(
        rows.iter()
            .map(|r| PValueEntry { id: r.id.clone(), raw_p: r.p, weight: r.weight })
            .collect(),
    )?;
    let method = match method {
        MethodArg::Bh => Method::Bh,
        MethodArg::By => Method::By,
        MethodArg::Wbh => Method::Wbh,
        MethodArg::Fdcr => Method::Fdcr,
    };
    let res = adjust(&pv, method, q, c0, intersection)?;
    let mut out: Vec<OutputRow> = rows
        .into_iter()
        .map(|r| OutputRow {
            adjusted_p: res.adjusted[&r.id],
            rejected: res.rejected.contains(&r.id),
            id: r.id,
            p: r.p,
            weight: r.weight,
        })
        .collect();
    if let Some(p0) = res.intersection_p {
        out.push(OutputRow {
            id: INTERSECTION_ID.into(),
            p: p0,
            weight: c0,
            adjusted_p: res.adjusted[INTERSECTION_ID],
            rejected: res.rejected.contains(INTERSECTION_ID),
        });
    }
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let stdout = io::stdout();
    if is_json {
        serde_json::to_writer_pretty(stdout.lock(), &out)?;
        println!();
    } else {
        let mut w = csv::Writer::from_writer(stdout.lock());
        for row in &out {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(())
}
