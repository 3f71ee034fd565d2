use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use seldet_core::bench::{self, AnalysisReport, Problem};
use seldet_core::datagen::{design_summary, generate, DesignSummary, TrialConfig};
use seldet_core::dataset::MixedModelDataset;
use seldet_core::dense::{dense_inverse_oracle, dense_log_det, DENSE_LIMIT};
use seldet_core::mm::{read_matrix_market_file, write_matrix_market_file};
use seldet_core::numeric::LdlOptions;
use seldet_core::pipeline::{analyze, factorize_and_invert};
use seldet_core::reml::{self, evaluate, logdet_fd, Form, VarianceParams};
use seldet_core::symbolic::selinv_flops_from_ldlt;
use seldet_core::{Ordering, SparseSymmetric};

#[derive(Parser)]
#[command(name = "seldet", version, about = "Sparse LDL^T, selected inversion and REML log-determinant derivatives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ordering and symbolic analysis: sizes and predicted flop counts
    Analyze(AnalyzeArgs),
    /// Factorize, compute the selected inverse and write it
    Selinv(SelinvArgs),
    /// Restricted log-likelihood, log-determinant gradient and PEV of a dataset
    Reml(RemlArgs),
    /// Generate a synthetic variety-trial dataset
    Gen(GenArgs),
    /// Time the pipeline over a list of problems and orderings
    Bench(BenchArgs),
    /// Check the kernels against dense references
    Verify(VerifyArgs),
}

#[derive(Args)]
struct OrderingArg {
    /// natural, amd or file:<path>
    #[arg(long, default_value = "amd")]
    ordering: Ordering,
}

#[derive(Args)]
struct AnalyzeArgs {
    matrix: PathBuf,
    #[command(flatten)]
    ordering: OrderingArg,
    /// Also write the report row as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SelinvArgs {
    matrix: PathBuf,
    #[command(flatten)]
    ordering: OrderingArg,
    /// Output Matrix Market file (default: <matrix stem>.selinv.mtx next to the input)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare against a dense inverse (n <= 500)
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct RemlArgs {
    dataset: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Comma-separated ratios, one per random factor (default all 1)
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Comma-separated ratios, one per residual block (default all 1)
    #[arg(long, value_delimiter = ',')]
    phi: Option<Vec<f64>>,
    #[command(flatten)]
    ordering: OrderingArg,
    /// Also evaluate the dense H-form and compare (n <= 500)
    #[arg(long)]
    check_h_form: bool,
    /// Compare the gradient with central finite differences
    #[arg(long)]
    fd_check: bool,
    /// Write the PEV diagonal as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Start from a preset, prob1 .. prob10
    #[arg(long)]
    preset: Option<String>,
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, key=value (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    settings: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset file to write
    #[arg(long)]
    out: PathBuf,
    /// Also write the design summary as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Matrix Market files or presets prob1 .. prob10
    problems: Vec<String>,
    /// Comma-separated orderings
    #[arg(long, value_delimiter = ',', default_value = "amd")]
    orderings: Vec<Ordering>,
    /// Main CSV (default: standard output)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Companion CSV of (nnz_l, time) pairs
    #[arg(long)]
    timing_csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Matrix Market files to check; without any, a built-in battery runs
    matrices: Vec<PathBuf>,
    #[command(flatten)]
    ordering: OrderingArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Selinv(a) => cmd_selinv(a),
        Command::Reml(a) => cmd_reml(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn read_matrix(path: &Path) -> Result<SparseSymmetric> {
    read_matrix_market_file(path).with_context(|| format!("reading {}", path.display()))
}

const ANALYZE_HEADER: &str =
    "n,nnz_c,c_per_column,c_density_permille,nnz_l,l_per_column,l_density_permille,ldlt_flops,selinv_flops";

fn analyze_row(r: &AnalysisReport) -> String {
    format!(
        "{},{},{:.2},{:.2},{},{:.2},{:.2},{},{}",
        r.n,
        r.nnz_c,
        r.c_per_column(),
        r.c_density_permille(),
        r.nnz_l,
        r.l_per_column(),
        r.l_density_permille(),
        r.flops.ldlt,
        r.flops.selinv
    )
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<bool> {
    let a = read_matrix(&args.matrix)?;
    let (sym, times) = analyze(&a, &args.ordering.ordering)?;
    let r = AnalysisReport::new(&a, &sym);
    println!("matrix       {}", args.matrix.display());
    println!("ordering     {}", args.ordering.ordering);
    println!("n            {}", r.n);
    println!("nnz(C)       {}  ({:.2} per column, {:.2} per mille)", r.nnz_c, r.c_per_column(), r.c_density_permille());
    println!("nnz(L)       {}  ({:.2} per column, {:.2} per mille)", r.nnz_l, r.l_per_column(), r.l_density_permille());
    println!("ldlt flops   {}", r.flops.ldlt);
    println!("selinv flops {}", r.flops.selinv);
    println!("tree height  {}", sym.tree_height());
    println!("time         {:.6}s ordering, {:.6}s symbolic", times.ordering.as_secs_f64(), times.symbolic.as_secs_f64());
    let ok = r.identity_holds();
    println!(
        "{} selinv = 2 * ldlt - (nnz(L) - n): {} = {}",
        pass(ok),
        r.flops.selinv,
        selinv_flops_from_ldlt(r.n as u64, r.nnz_l as u64, r.flops.ldlt)
    );
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        writeln!(w, "{ANALYZE_HEADER}")?;
        writeln!(w, "{}", analyze_row(&r))?;
        w.flush()?;
    }
    Ok(ok)
}

fn default_out(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    input.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_selinv(args: SelinvArgs) -> Result<bool> {
    let a = read_matrix(&args.matrix)?;
    let opts = LdlOptions::from_env();
    let (f, z, t) = factorize_and_invert(&a, &args.ordering.ordering, &opts)?;
    let out = args.out.clone().unwrap_or_else(|| default_out(&args.matrix, ".selinv.mtx"));
    write_matrix_market_file(&z.to_sparse(), &out).with_context(|| format!("writing {}", out.display()))?;

    let pred = f.symbolic().flops();
    let mut ok = f.flops() == pred.ldlt && z.flops() == pred.selinv;
    println!("n            {}", a.n());
    println!("nnz(L)       {}", f.symbolic().nnz_l());
    println!("logdet       {:.17e}", f.log_det());
    println!("ldlt flops   measured {} predicted {}", f.flops(), pred.ldlt);
    println!("selinv flops measured {} predicted {}", z.flops(), pred.selinv);
    println!(
        "time         {:.6}s ordering, {:.6}s symbolic, {:.6}s factor, {:.6}s selinv",
        t.ordering.as_secs_f64(),
        t.symbolic.as_secs_f64(),
        t.factor.as_secs_f64(),
        t.selinv.as_secs_f64()
    );
    if !f.near_singular().is_empty() {
        eprintln!(
            "warning: {} near-singular pivots (first at permuted index {})",
            f.near_singular().len(),
            f.near_singular()[0]
        );
    }
    println!("{} measured flops equal predictions", pass(ok));
    println!("wrote        {}", out.display());

    if args.verify {
        if a.n() > DENSE_LIMIT {
            bail!("--verify needs n <= {DENSE_LIMIT}, got {}", a.n());
        }
        let dense = dense_inverse_oracle(&a)?;
        let mut worst = 0.0f64;
        for j in 0..a.n() {
            for i in j..a.n() {
                if let Some(v) = z.get_entry(i, j)? {
                    let d = dense[(i, j)];
                    if v != d {
                        worst = worst.max((v - d).abs() / d.abs());
                    }
                }
            }
        }
        let ld = dense_log_det(&a)?;
        let ld_err = if ld == f.log_det() { 0.0 } else { (f.log_det() - ld).abs() / ld.abs() };
        let good = worst <= 1e-8 && ld_err <= 1e-8;
        println!("{} dense check: max rel error {worst:.3e}, logdet rel error {ld_err:.3e}", pass(good));
        ok &= good;
    }
    Ok(ok)
}

fn read_dataset(path: &Path) -> Result<MixedModelDataset> {
    MixedModelDataset::read_tsv_file(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_reml(args: RemlArgs) -> Result<bool> {
    let d = read_dataset(&args.dataset)?;
    let gamma = args.gamma.clone().unwrap_or_else(|| vec![1.0; d.random().len()]);
    let phi = args.phi.clone().unwrap_or_else(|| vec![1.0; d.residual().n_levels()]);
    let v = VarianceParams::new(args.sigma2, gamma, phi)?;
    let e = evaluate(&d, &v, &args.ordering.ordering, &LdlOptions::from_env())?;
    let t = &e.terms;
    println!("observations {}  fixed {}  random {}", d.n(), e.system.p, e.system.b);
    println!("nnz(C) {}  nnz(L) {}", e.system.c.nnz(), e.factor.symbolic().nnz_l());
    println!("loglik       {:.12e}", t.loglik);
    println!("logdet C     {:.12e}", t.logdet_main);
    println!("logdet R     {:.12e}", t.logdet_r);
    println!("logdet G     {:.12e}", t.logdet_g);
    println!("y'Py         {:.12e}", t.ypy);
    println!("gradient of logdet C:");
    let names = ratio_names(&d);
    for (name, g) in names.iter().zip(&e.gradient) {
        println!("  {name:<24} {g:.12e}");
    }
    let (lo, hi, mean) = summary(&e.pev);
    println!("pev          min {lo:.6e}  mean {mean:.6e}  max {hi:.6e}");
    let mut ok = e.pev.iter().all(|&x| x > 0.0);

    if args.check_h_form {
        let h = reml::restricted_loglik(&d, &v, Form::H)?;
        let diff = (h - t.loglik).abs() / t.loglik.abs().max(1.0);
        let good = diff <= 1e-8;
        println!("{} forms agree: max rel diff {diff:.3e} (H-form {h:.12e})", pass(good));
        ok &= good;
    }
    if args.fd_check {
        println!("{:<24} {:>20} {:>20} {:>10}", "parameter", "trace", "finite diff", "rel err");
        let mut all = true;
        for (k, name) in names.iter().enumerate() {
            let fd = logdet_fd(&d, &v, k, 1e-5)?;
            let g = e.gradient[k];
            let err = if g == fd { 0.0 } else { (g - fd).abs() / fd.abs() };
            all &= err <= 1e-6;
            println!("{name:<24} {g:>20.12e} {fd:>20.12e} {err:>10.2e}");
        }
        println!("{} gradient matches finite differences", pass(all));
        ok &= all;
    }
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        writeln!(w, "index,pev")?;
        for (i, p) in e.pev.iter().enumerate() {
            writeln!(w, "{i},{p:e}")?;
        }
        w.flush()?;
    }
    Ok(ok)
}

fn ratio_names(d: &MixedModelDataset) -> Vec<String> {
    let mut names: Vec<String> = d.random().iter().map(|f| format!("gamma[{}]", f.name)).collect();
    names.extend(d.residual().levels.iter().map(|l| format!("phi[{l}]")));
    names
}

fn summary(x: &[f64]) -> (f64, f64, f64) {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi, x.iter().sum::<f64>() / x.len().max(1) as f64)
}

fn cmd_gen(args: GenArgs) -> Result<bool> {
    let mut cfg = match &args.preset {
        Some(p) => TrialConfig::preset(p).with_context(|| format!("unknown preset {p:?}"))?,
        None => TrialConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = String::new();
        if let Some(p) = &args.preset {
            lines.push_str(&format!("preset={p}\n"));
        }
        lines.push_str(&text);
        cfg = TrialConfig::parse(&lines)?;
    }
    for s in &args.settings {
        let (k, v) = s.split_once('=').with_context(|| format!("expected KEY=VALUE, got {s:?}"))?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let d = generate(&cfg)?;
    d.write_tsv_file(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let s = design_summary(&d);
    print_summary(&mut io::stdout().lock(), &s)?;
    println!("effects {}  wrote {}", s.effects(), args.out.display());
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        writeln!(w, "{}", DesignSummary::HEADER.join(","))?;
        writeln!(w, "{}", s.row().join(","))?;
        w.flush()?;
    }
    Ok(true)
}

fn print_summary(w: &mut impl Write, s: &DesignSummary) -> io::Result<()> {
    let row = s.row();
    for h in DesignSummary::HEADER {
        write!(w, "{h:>8}")?;
    }
    writeln!(w)?;
    for c in &row {
        write!(w, "{c:>8}")?;
    }
    writeln!(w)
}

fn cmd_bench(args: BenchArgs) -> Result<bool> {
    let problems: Vec<Problem> = args.problems.iter().map(|p| Problem::parse(p)).collect();
    let rows = bench::run(&problems, &args.orderings);
    match &args.csv {
        Some(path) => bench::write_csv(&rows, create(path)?)?,
        None => bench::write_csv(&rows, io::stdout().lock())?,
    }
    if let Some(path) = &args.timing_csv {
        bench::write_timing_csv(&rows, create(path)?)?;
    }
    let mut ok = true;
    for r in &rows {
        match &r.outcome {
            Ok(s) if s.measured != s.report.flops => {
                eprintln!("{} / {}: measured flops differ from predictions", r.problem, r.ordering);
                ok = false;
            }
            Ok(_) => {}
            Err(e) => {
                eprintln!("{} / {}: {e}", r.problem, r.ordering);
                ok = false;
            }
        }
    }
    match bench::time_memory_correlation(&rows) {
        Some(rho) => eprintln!("spearman(nnz(L), time) = {rho:.3} over {} rows", rows.len()),
        None => eprintln!("spearman(nnz(L), time) undefined"),
    }
    Ok(ok)
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let mut ok = true;
    let mut report = |name: &str, good: bool, detail: String| {
        ok &= good;
        println!("{} {name}: {detail}", pass(good));
    };
    if args.matrices.is_empty() {
        let published = [(4796u64, 172023u64, 17175555u64, 34183883u64), (5892, 273315, 40768817, 81270211), (1806, 109078, 9137434, 18167596)];
        let good = published.iter().all(|&(n, l, f, s)| selinv_flops_from_ldlt(n, l, f) == s);
        report("flop identity", good, "published counts reproduced".into());

        let t = Instant::now();
        let mut worst = 0.0f64;
        let mut flops_ok = true;
        for k in 0..20 {
            let a = seldet_core::gallery::random_spd(20 + 9 * k, 3.0, 1e6, args.seed.wrapping_add(k as u64));
            let (w, f) = dense_check(&a, &args.ordering.ordering)?;
            worst = worst.max(w);
            flops_ok &= f;
        }
        report("selected inverse", worst <= 1e-10, format!("20 random matrices, max rel error {worst:.3e}"));
        report("flop counters", flops_ok, "measured equal predicted".into());

        let mut fd_worst = 0.0f64;
        let mut form_worst = 0.0f64;
        for k in 0..5 {
            let d = seldet_core::gallery::random_dataset(40, args.seed.wrapping_add(100 + k))?;
            let v = VarianceParams::unit(&d).with_sigma2(1.7)?;
            let e = evaluate(&d, &v, &args.ordering.ordering, &LdlOptions::default())?;
            for i in 0..v.n_ratios() {
                let fd = logdet_fd(&d, &v, i, 1e-5)?;
                fd_worst = fd_worst.max((e.gradient[i] - fd).abs() / fd.abs());
            }
            let h = reml::restricted_loglik(&d, &v, Form::H)?;
            form_worst = form_worst.max((h - e.terms.loglik).abs() / h.abs().max(1.0));
        }
        report("gradient", fd_worst <= 1e-6, format!("max rel error vs finite differences {fd_worst:.3e}"));
        report("likelihood forms", form_worst <= 1e-8, format!("max rel diff {form_worst:.3e}"));
        println!("time {:.2}s", t.elapsed().as_secs_f64());
    } else {
        for path in &args.matrices {
            let a = read_matrix(path)?;
            if a.n() > DENSE_LIMIT {
                bail!("{}: n = {} exceeds the dense limit {DENSE_LIMIT}", path.display(), a.n());
            }
            let (worst, flops_ok) = dense_check(&a, &args.ordering.ordering)?;
            report(
                &path.display().to_string(),
                worst <= 1e-8 && flops_ok,
                format!("max rel error {worst:.3e}, flops {}", if flops_ok { "exact" } else { "mismatch" }),
            );
        }
    }
    Ok(ok)
}

/// Largest relative error of selected entries and log-determinant against
/// dense references, and whether the flop counters matched.
fn dense_check(a: &SparseSymmetric, ordering: &Ordering) -> Result<(f64, bool)> {
    let (f, z, _) = factorize_and_invert(a, ordering, &LdlOptions::default())?;
    let dense = dense_inverse_oracle(a)?;
    let rel = |x: f64, y: f64| if x == y { 0.0 } else { (x - y).abs() / y.abs() };
    let mut worst = rel(f.log_det(), dense_log_det(a)?);
    for j in 0..a.n() {
        for i in j..a.n() {
            if let Some(v) = z.get_entry(i, j)? {
                worst = worst.max(rel(v, dense[(i, j)]));
            }
        }
    }
    let pred = f.symbolic().flops();
    Ok((worst, f.flops() == pred.ldlt && z.flops() == pred.selinv))
}
