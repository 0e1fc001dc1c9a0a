use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use zigzag_core::config::StudyConfig;
use zigzag_core::experiments::{
    fit_b, log_checkpoints, rate_slope, run_mse, with_threads, ExperimentConfig, SlopeFit,
};
use zigzag_core::io::{fmt_f64, write_skeleton, write_table, SkeletonMeta};
use zigzag_core::pdmp::{simulate_with, SimOptions, ZigZagState};
use zigzag_core::theory::{
    certify_drift, drift_table, lyapunov, refresh_threshold_m, DriftReport, DriftRequest, GridSpec,
    HairerTransforms, StudentTailBound,
};
use zigzag_core::{Error, IndicatorQuery, RefreshPolicy, Result, RngStream, Target};

use crate::manifest::RunManifest;
use crate::{BoundsArgs, DriftArgs, MseArgs, RateArgs, SimulateArgs};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn manifest_beside(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// `grad:1` → `grad_1`, safe for file names.
fn file_stem(tag: &str) -> String {
    tag.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

pub fn simulate(args: SimulateArgs) -> Result<u8> {
    let mut manifest = RunManifest::new("simulate");
    let target = Target::from_tag(&args.target)?;
    let refresh = RefreshPolicy::from_tag(&args.refresh)?;
    let start: ZigZagState = args.start.parse()?;
    let mut options = SimOptions::default();
    if let Some(cap) = args.max_events {
        options.max_events = cap;
    }
    let mut rng = RngStream::new(args.seed, args.stream);
    let skeleton = simulate_with(start, args.horizon, &target, &refresh, &mut rng, &options)?;
    let meta = SkeletonMeta {
        target: target.tag().to_string(),
        refresh: refresh.tag(),
        seed: args.seed,
        stream: args.stream,
    };
    match &args.out {
        Some(path) => {
            write_skeleton(create(path)?, &skeleton, &meta)?;
            manifest.seed(args.seed);
            manifest.set("target", &meta.target);
            manifest.set("refresh", &meta.refresh);
            manifest.set("start", start);
            manifest.set("horizon", args.horizon);
            manifest.set("stream", args.stream);
            manifest.set("events", skeleton.events().len());
            manifest.artifact(path);
            manifest.write(&manifest_beside(path))?;
        }
        None => write_skeleton(io::stdout().lock(), &skeleton, &meta)?,
    }
    Ok(0)
}

fn study_from_args(args: &MseArgs) -> Result<StudyConfig> {
    let mut study = match &args.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => StudyConfig {
            target: "cauchy".into(),
            policies: vec!["zero".into()],
            start: "-5,+1".into(),
            horizon: 1e4,
            replicates: 1000,
            seed: 1,
            threshold: 5.0,
            checkpoints: 200,
            first_checkpoint: 1.0,
        },
    };
    if let Some(v) = &args.target {
        study.target = v.clone();
    }
    if let Some(v) = &args.policies {
        study.policies = v.clone();
    }
    if let Some(v) = &args.start {
        study.start = v.clone();
    }
    if let Some(v) = args.horizon {
        study.horizon = v;
    }
    if let Some(v) = args.replicates {
        study.replicates = v;
    }
    if let Some(v) = args.seed {
        study.seed = v;
    }
    if let Some(v) = args.threshold {
        study.threshold = v;
    }
    if let Some(v) = args.checkpoints {
        study.checkpoints = v;
    }
    Ok(study)
}

pub fn mse(args: MseArgs, threads: Option<usize>) -> Result<u8> {
    let study = study_from_args(&args)?;
    let experiments = study.experiments()?;
    fs::create_dir_all(&args.out_dir)?;
    let mut manifest = RunManifest::new("mse");
    manifest.seed(study.seed);
    manifest.set("target", &study.target);
    manifest.set("policies", study.policies.join(","));
    manifest.set("start", &study.start);
    manifest.set("horizon", study.horizon);
    manifest.set("replicates", study.replicates);
    manifest.set("threshold", study.threshold);
    manifest.set("checkpoints", study.checkpoints);
    if let Some(n) = threads {
        manifest.set("threads", n);
    }

    let mut files = Vec::new();
    let mut truth = f64::NAN;
    println!("{:<12} {:>14} {:>14}", "policy", "final mse", "stderr");
    for cfg in &experiments {
        let curve = with_threads(threads, || run_mse(cfg))??;
        let rows: Vec<Vec<f64>> = (0..curve.mse.len())
            .map(|i| vec![curve.checkpoints[i], curve.mse[i], curve.stderr[i]])
            .collect();
        let path = args.out_dir.join(format!("mse_{}.csv", file_stem(&cfg.refresh_tag)));
        write_table(create(&path)?, &["time", "mse", "stderr"], &rows)?;
        let last = rows.len() - 1;
        println!("{:<12} {:>14.6e} {:>14.6e}", cfg.refresh_tag, curve.mse[last], curve.stderr[last]);
        manifest.artifact(&path);
        files.push((cfg.refresh_tag.clone(), path));
        truth = curve.truth;
    }
    manifest.set("truth", fmt_f64(truth));
    if args.plot {
        let path = args.out_dir.join("mse.gp");
        let mut w = create(&path)?;
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set logscale xy")?;
        writeln!(w, "set xlabel 'time'")?;
        writeln!(w, "set ylabel 'mean squared error'")?;
        let plots: Vec<String> = files
            .iter()
            .map(|(tag, p)| {
                let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                format!("'{name}' skip 1 using 1:2 with lines title '{tag}'")
            })
            .collect();
        writeln!(w, "plot {}", plots.join(", \\\n     "))?;
        w.flush()?;
        manifest.artifact(&path);
    }
    manifest.write(&args.out_dir.join("manifest.txt"))?;
    Ok(0)
}

fn print_report(target: &Target, refresh: &RefreshPolicy, report: &DriftReport) {
    let p = &report.params;
    println!("target              {}", target.tag());
    println!("refresh             {}", refresh.tag());
    println!("k                   {}", p.k);
    println!("a                   {}", p.a);
    println!("nu                  {}", p.nu);
    println!("beta                {}", p.beta);
    println!("delta               {}", p.delta);
    println!("compact radius      {}", report.compact_radius);
    println!("sup LV/V^a outside  {:e}", report.sup_ratio_outside);
    println!("c margin            {:e}", report.c_margin);
    println!("K inside            {:e}", report.k_inside);
}

pub fn drift_check(args: DriftArgs) -> Result<u8> {
    let mut manifest = RunManifest::new("drift-check");
    let target = Target::from_tag(&args.target)?;
    let refresh = RefreshPolicy::from_tag(&args.refresh)?;
    let nu = match (args.nu, target.tail_index()) {
        (Some(nu), _) => nu,
        (None, Some(index)) => index - args.tail_slack,
        (None, None) => {
            return Err(Error::InvalidParameter(format!(
                "{} has no tail index; pass --nu",
                target.tag()
            )))
        }
    };
    let grid = GridSpec {
        r_min: args.grid_min,
        r_max: args.grid_max,
        per_decade: args.per_decade,
    };
    let request = DriftRequest {
        k: args.k,
        nu,
        beta: args.beta,
        delta: args.delta,
        delta_margin: args.delta_margin,
    };
    let (report, reason) = match certify_drift(&request, &target, &refresh, &grid) {
        Ok(report) => (report, None),
        Err(Error::NotCertified { reason, best }) => (*best, Some(reason)),
        Err(e) => return Err(e),
    };
    print_report(&target, &refresh, &report);
    if let Some(index) = target.tail_index() {
        let label = format!("M(k), eta={}", args.eta);
        match refresh_threshold_m(args.k, index, args.eta) {
            Ok(m) => println!("{label:<20}{m}"),
            Err(e) => println!("{label:<20}unavailable: {e}"),
        }
    }
    println!("certified           {}", if report.certified { "yes" } else { "no" });
    if let Some(reason) = &reason {
        eprintln!("{reason}");
    }
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        writeln!(w, "x,theta,ratio,bound")?;
        for row in drift_table(&report.params, &target, &refresh, &grid)? {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(row.x),
                row.theta,
                fmt_f64(row.ratio.value()),
                fmt_f64(row.bound.value())
            )?;
        }
        w.flush()?;
        manifest.set("target", target.tag());
        manifest.set("refresh", refresh.tag());
        manifest.set("k", args.k);
        manifest.set("nu", nu);
        manifest.set("beta", report.params.beta);
        manifest.set("delta", report.params.delta);
        manifest.set("certified", report.certified);
        manifest.artifact(path);
        manifest.write(&manifest_beside(path))?;
    }
    Ok(if report.certified { 0 } else { 1 })
}

pub fn rate(args: RateArgs, threads: Option<usize>) -> Result<u8> {
    let mut manifest = RunManifest::new("rate");
    let target = Target::from_tag(&args.target)?;
    let config = ExperimentConfig {
        target_tag: args.target.clone(),
        refresh_tag: args.refresh.clone(),
        initial: args.start.parse()?,
        horizon: args.horizon,
        replicates: args.replicates,
        checkpoints: log_checkpoints(1.0, args.horizon, args.checkpoints)?,
        seed: args.seed,
        query: IndicatorQuery::new(0.0),
    };
    let window = (args.fit_from.unwrap_or(args.horizon / 100.0), args.horizon);
    let report = with_threads(threads, || rate_slope(&config, &args.thresholds, window))??;
    fs::create_dir_all(&args.out_dir)?;
    let rows: Vec<Vec<f64>> = report
        .checkpoints
        .iter()
        .zip(&report.discrepancy)
        .map(|(&t, &d)| vec![t, d])
        .collect();
    let csv = args.out_dir.join("rate.csv");
    write_table(create(&csv)?, &["time", "D"], &rows)?;

    let mut summary = Vec::new();
    match report.fit {
        SlopeFit::Fitted { slope, ci_low, ci_high, points, .. } => {
            summary.push(("fit".to_string(), "fitted".to_string()));
            summary.push(("slope".into(), fmt_f64(slope)));
            summary.push(("slope_ci_low".into(), fmt_f64(ci_low)));
            summary.push(("slope_ci_high".into(), fmt_f64(ci_high)));
            summary.push(("fit_points".into(), points.to_string()));
        }
        SlopeFit::Inconclusive { points } => {
            summary.push(("fit".into(), "inconclusive".into()));
            summary.push(("fit_points".into(), points.to_string()));
        }
    }
    summary.push(("noise_floor".into(), fmt_f64(report.noise_floor)));
    summary.push(("fit_window".into(), format!("{},{}", fmt_f64(window.0), fmt_f64(window.1))));

    let refresh = RefreshPolicy::from_tag(&args.refresh)?;
    let certificate = target.tail_index().map(|index| {
        certify_drift(
            &DriftRequest::new(args.k, index - args.tail_slack),
            &target,
            &refresh,
            &GridSpec::default(),
        )
    });
    match certificate {
        Some(Ok(cert)) => {
            let v = lyapunov(config.initial.x, config.initial.theta, &cert.params, &target);
            let series: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
            summary.push(("certified".into(), "yes".into()));
            summary.push(("k".into(), args.k.to_string()));
            summary.push(("beta".into(), fmt_f64(cert.params.beta)));
            summary.push(("delta".into(), fmt_f64(cert.params.delta)));
            summary.push(("B".into(), fmt_f64(fit_b(&series, v, args.k)?)));
        }
        Some(Err(Error::NotCertified { .. })) => summary.push(("certified".into(), "no".into())),
        Some(Err(e)) => summary.push(("certified".into(), format!("error: {e}"))),
        None => summary.push(("certified".into(), "no tail index".into())),
    }
    let report_path = args.out_dir.join("report.txt");
    let mut w = create(&report_path)?;
    for (k, v) in &summary {
        writeln!(w, "{k} = {v}")?;
        println!("{k:<14} {v}");
    }
    w.flush()?;

    manifest.seed(args.seed);
    if let Some(n) = threads {
        manifest.set("threads", n);
    }
    manifest.set("target", &args.target);
    manifest.set("refresh", &args.refresh);
    manifest.set("start", &args.start);
    manifest.set("horizon", args.horizon);
    manifest.set("replicates", args.replicates);
    manifest.set(
        "thresholds",
        args.thresholds.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
    );
    manifest.artifact(&csv);
    manifest.artifact(&report_path);
    manifest.write(&args.out_dir.join("manifest.txt"))?;
    Ok(0)
}

pub fn bounds(args: BoundsArgs) -> Result<u8> {
    fs::create_dir_all(&args.out_dir)?;
    let mut manifest = RunManifest::new("bounds");
    manifest.set("nu", args.nu);
    manifest.set("eta", args.eta);
    manifest.set("c", args.c);
    manifest.set("a", args.a);
    manifest.set("eps", args.eps);
    let mut code = 0;

    let ks = args.k.clone().unwrap_or_else(|| {
        [0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999]
            .iter()
            .map(|f| f * args.nu)
            .chain([args.nu - 1e-6])
            .collect()
    });
    let path = args.out_dir.join("threshold.csv");
    let mut w = create(&path)?;
    writeln!(w, "k,M")?;
    println!("{:>24} {:>24}", "k", "M(k)");
    for &k in &ks {
        match refresh_threshold_m(k, args.nu, args.eta) {
            Ok(m) => {
                writeln!(w, "{},{}", fmt_f64(k), fmt_f64(m))?;
                println!("{k:>24} {m:>24.16e}");
            }
            Err(e) => {
                writeln!(w, "{},error", fmt_f64(k))?;
                eprintln!("k = {k}: {e}");
                code = code.max(match e {
                    Error::Domain(_) | Error::InvalidParameter(_) => 3,
                    _ => 1,
                });
            }
        }
    }
    w.flush()?;
    manifest.artifact(&path);

    let transforms = HairerTransforms::new(args.c, args.a)?;
    let path = args.out_dir.join("transforms.csv");
    let mut rows = Vec::new();
    for &t in &args.t {
        rows.push(vec![t, transforms.h_inv(t)?, transforms.f_of_h_inv(t)?]);
    }
    write_table(create(&path)?, &["t", "h_inv", "f_of_h_inv"], &rows)?;
    manifest.artifact(&path);

    let tail = StudentTailBound::new(args.nu, args.eps)?;
    let path = args.out_dir.join("lower_bound.csv");
    let rows = log_checkpoints(tail.radius, tail.radius * 1e4, 50)?
        .into_iter()
        .map(|t| Ok(vec![t, tail.lower_bound(t)?]))
        .collect::<Result<Vec<_>>>()?;
    write_table(create(&path)?, &["t", "lower_bound"], &rows)?;
    println!("tail constant C0 = {:e}, valid for t >= {}", tail.c0, tail.radius);
    manifest.artifact(&path);

    manifest.write(&args.out_dir.join("manifest.txt"))?;
    Ok(code)
}
