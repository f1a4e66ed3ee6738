use std::fmt::Write as _;
use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::Path;
use std::sync::Arc;

use seeded_laplacian::eval::{confusion, evaluate_dataset, fscore, jaccard, EvalMode};
use seeded_laplacian::features::{parse_cues, AugmentMode};
use seeded_laplacian::image::{
    load_dataset, load_image, load_mask, load_scribbles_for, render_overlay, save_mask,
};
use seeded_laplacian::robot::{run_robot, RobotMode, RobotParams};
use seeded_laplacian::segment::{feature_matrices, segment_single_pass, SegmenterParams, StageTimings};
use seeded_laplacian::ssl::toy::{self, run_toy, ToyConfig};
use seeded_laplacian::ssl::{SslParams, MAX_EXACT_POINTS};
use seeded_laplacian::{Error, Result};
use seeded_laplacian_service::{port_from_env, AppState, DEFAULT_TTL};

use crate::args::{BenchArgs, EvalArgs, Mode, RobotArgs, SegmentArgs, ServeArgs, ToyArgs};

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn mode_name(m: AugmentMode) -> &'static str {
    match m {
        AugmentMode::Multiply => "multiply",
        AugmentMode::Concat => "concat",
    }
}

/// One `key=value` line describing the run, for CSV and log headers.
fn describe(p: &SegmenterParams) -> String {
    let a = &p.affinity;
    format!(
        "eigvecs={} pivots_fg={} pivots_bg={} lambda={} bins={} gamma_g={} scales={} features={} mode={}",
        p.m,
        a.k_fg,
        a.k_bg,
        p.lambda,
        p.bins,
        a.gamma_g,
        join(&a.scales),
        join(&a.cues),
        mode_name(a.mode)
    )
}

fn refine_name(m: RobotMode) -> &'static str {
    match m {
        RobotMode::Naive => "naive",
        RobotMode::Incremental => "incremental",
    }
}

fn timing_lines(t: &StageTimings) -> String {
    format!(
        "pivots {:.3} s\naffinities {:.3} s\nfeatures {:.3} s\npca {:.3} s\nsmoothness {:.3} s\npostprocess {:.3} s\ntotal {:.3} s\n",
        t.pivots, t.affinities, t.features, t.pca, t.smoothness, t.postprocess, t.total
    )
}

pub fn segment(a: &SegmentArgs) -> Result<()> {
    let params = a.pipeline.params(a.mode);
    params.validate()?;
    let image = load_image(&a.image)?;
    let scribbles = load_scribbles_for(&a.scribbles, &image)?;
    let gt = a.gt.as_ref().map(load_mask).transpose()?;
    let r = segment_single_pass(&image, &scribbles, &params)?;
    save_mask(&r.mask, &a.out)?;
    if let Some(path) = &a.overlay {
        render_overlay(&image, &r.mask, gt.as_ref())?.save(path)?;
    }
    if let Some(path) = &a.dump_features {
        let fm = feature_matrices(&image, &scribbles, &params)?.swap_remove(0);
        let mut csv = format!("# features scale={} {}\n{}\n", params.affinity.scales[0], describe(&params), fm.header());
        for i in 0..fm.n_rows() {
            let row: Vec<String> = (0..fm.n_cols()).map(|j| fm.values[(i, j)].to_string()).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        write_file(path, csv)?;
    }
    println!("# segment {}", describe(&params));
    println!(
        "{}x{} pixels, {} pivots, {} foreground",
        image.width(),
        image.height(),
        r.pivot_count,
        r.mask.foreground_count()
    );
    if let Some(gt) = &gt {
        let c = confusion(&r.mask, gt)?;
        println!("JI {:.4}  Fs {:.4}", jaccard(&c), fscore(&c));
    }
    if !r.skipped_scales.is_empty() {
        println!("skipped scales {}", join(&r.skipped_scales));
    }
    print!("{}", timing_lines(&r.timings));
    Ok(())
}

fn ablate(mut p: SegmenterParams, pairs: &[String]) -> Result<SegmenterParams> {
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidParam(format!("--ablate wants KEY=VALUE, got {pair:?}")))?;
        let bad = || Error::InvalidParam(format!("--ablate {k}: cannot use {v:?}"));
        match k.trim() {
            "features" => p.affinity.cues = parse_cues(v)?,
            "augment" | "mode" => p.affinity.mode = v.parse()?,
            "eigvecs" => p.m = v.parse().map_err(|_| bad())?,
            "lambda" => p.lambda = v.parse().map_err(|_| bad())?,
            "pivots" => {
                let k = v.parse().map_err(|_| bad())?;
                p.affinity.k_fg = k;
                p.affinity.k_bg = k;
            }
            "scales" => {
                p.affinity.scales = v
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            }
            other => {
                return Err(Error::InvalidParam(format!(
                    "--ablate key {other:?} is not one of features, augment, eigvecs, lambda, pivots, scales"
                )))
            }
        }
    }
    p.validate()?;
    Ok(p)
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let params = ablate(a.pipeline.params(a.augment), &a.ablate)?;
    let manifest = load_dataset(&a.manifest)?;
    let mode = match a.mode {
        Mode::Single => EvalMode::SinglePass,
        Mode::Robot => EvalMode::Robot(
            RobotParams {
                max_strokes: a.strokes,
                mode: a.refine.into(),
                ..RobotParams::default()
            },
            a.band,
        ),
    };
    let mut header = format!("# eval {} {}", a.manifest.display(), describe(&params));
    if let EvalMode::Robot(r, band) = mode {
        write!(
            header,
            " strokes={} refine={} band={}:{}",
            r.max_strokes,
            refine_name(r.mode),
            band.low,
            band.high
        )
        .expect("string write");
    }
    tracing::info!("{} samples", manifest.len());
    let report = evaluate_dataset(&manifest, &params, mode);
    println!("{header}");
    print!("{}", report.to_table());
    if let Some(path) = &a.out {
        write_file(path, format!("{header}\n{}", report.to_csv()))?;
    }
    if report.samples.is_empty() && !report.failures.is_empty() {
        return Err(Error::DegenerateData(format!(
            "all {} samples failed; first: {}: {}",
            report.failures.len(),
            report.failures[0].id,
            report.failures[0].error
        )));
    }
    for f in &report.failures {
        eprintln!("warning: {} failed: {}", f.id, f.error);
    }
    Ok(())
}

pub fn robot(a: &RobotArgs) -> Result<()> {
    let params = a.pipeline.params(a.mode);
    params.validate()?;
    let image = load_image(&a.image)?;
    let scribbles = load_scribbles_for(&a.scribbles, &image)?;
    let gt = load_mask(&a.gt)?;
    let r = RobotParams {
        max_strokes: a.strokes,
        radius: a.radius,
        mode: a.refine.into(),
    };
    let trace = run_robot(&image, &gt, &scribbles, &params, &r)?;
    let avg = seeded_laplacian::eval::avg_strokes(&trace.jaccards(), a.band, r.max_strokes + 1);
    let header = format!(
        "# robot {} strokes={} radius={} refine={} band={}:{}\n",
        describe(&params),
        r.max_strokes,
        r.radius,
        refine_name(r.mode),
        a.band.low,
        a.band.high
    );
    emit(a.out.as_deref(), &format!("{header}{}", trace.to_csv()))?;
    if let Some(path) = &a.mask {
        save_mask(&trace.final_mask, path)?;
    }
    let last = trace.steps.last().map_or(0.0, |s| s.jaccard);
    eprintln!(
        "{} strokes, JI {:.4} -> {:.4}, avg strokes {:.3}",
        trace.strokes(),
        trace.steps[0].jaccard,
        last,
        avg
    );
    Ok(())
}

fn toy_config(n: usize, seed: u64, eigvecs: usize, lambda: f64, bins: usize) -> ToyConfig {
    ToyConfig {
        n,
        seed,
        ssl: SslParams {
            m: eigvecs,
            lambda,
            bins,
            ..SslParams::default()
        },
        ..ToyConfig::default()
    }
}

pub fn toy(a: &ToyArgs) -> Result<()> {
    if a.n < 10 {
        return Err(Error::InvalidParam(format!("--n must be at least 10, got {}", a.n)));
    }
    let cfg = toy_config(a.n, a.seed, a.eigvecs, a.lambda, a.bins);
    cfg.ssl.validate()?;
    let (data, report) = run_toy(&cfg)?;
    let header = format!(
        "# toy n={} seed={} eigvecs={} lambda={} bins={} labels_per_class={}",
        a.n, a.seed, a.eigvecs, a.lambda, a.bins, cfg.labels_per_class
    );
    println!("{header}");
    println!("eigenfunction accuracy {:.4}  time {:.4} s", report.efn_accuracy, report.efn_time.as_secs_f64());
    match (report.agreement, report.exact_time, report.exact_accuracy) {
        (Some(agree), Some(t), Some(acc)) => {
            println!("exact accuracy {acc:.4}  time {:.4} s", t.as_secs_f64());
            println!("agreement {agree:.4}");
        }
        _ => println!("exact path skipped: n > {MAX_EXACT_POINTS}"),
    }
    if let Some(path) = &a.out {
        let mut csv = format!("{header}\nx,y,truth,labeled,f_efn,f_exact\n");
        let mut labeled = vec![0.0; a.n];
        for (&i, &t) in data.labels.indices.iter().zip(&data.labels.targets) {
            labeled[i] = t;
        }
        for i in 0..a.n {
            let exact = report.exact_field.as_ref().map_or(String::new(), |f| f[i].to_string());
            writeln!(
                csv,
                "{},{},{},{},{},{exact}",
                data.points[(i, 0)],
                data.points[(i, 1)],
                data.truth[i],
                labeled[i],
                report.efn_field[i]
            )
            .expect("string write");
        }
        write_file(path, csv)?;
    }
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    if let Some(&n) = a.sizes.iter().find(|&&n| n < 10) {
        return Err(Error::InvalidParam(format!("--sizes entries must be at least 10, got {n}")));
    }
    let cfg = toy_config(0, a.seed, a.eigvecs, 100.0, 50);
    let rows = toy::bench(&cfg, &a.sizes, !a.no_exact)?;
    let mut csv = format!(
        "# bench seed={} eigvecs={} exact={} exact_limit={MAX_EXACT_POINTS}\nn,t_exact,t_efn,t_efn_opt\n",
        a.seed, a.eigvecs, !a.no_exact
    );
    for r in &rows {
        let exact = r.t_exact.map_or(String::new(), |t| format!("{:.6}", t.as_secs_f64()));
        writeln!(
            csv,
            "{},{exact},{:.6},{:.6}",
            r.n,
            r.t_efn.as_secs_f64(),
            r.t_efn_opt.as_secs_f64()
        )
        .expect("string write");
    }
    emit(a.out.as_deref(), &csv)
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let port = match a.port {
        Some(p) => p,
        None => port_from_env().map_err(Error::InvalidParam)?,
    };
    let host: IpAddr = a
        .host
        .parse()
        .map_err(|_| Error::InvalidParam(format!("--host {:?} is not an IP address", a.host)))?;
    if let Some(dir) = &a.static_dir {
        if !dir.is_dir() {
            return Err(Error::MissingFile(dir.clone()));
        }
    }
    let addr = SocketAddr::new(host, port);
    let state = Arc::new(AppState::new(SegmenterParams::default(), DEFAULT_TTL));
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|source| Error::Io {
            path: "tokio runtime".into(),
            source,
        })?;
    eprintln!("serving on http://{addr}");
    rt.block_on(seeded_laplacian_service::serve(addr, state, a.static_dir.clone()))
        .map_err(|source| Error::Io {
            path: addr.to_string().into(),
            source,
        })
}
