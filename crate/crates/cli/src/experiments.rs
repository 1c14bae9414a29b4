use std::time::Instant;

use fpp_core::average::{fluctuation_sup_over, fluctuation_table, mean_distance, sample_pairs, PairSampling};
use fpp_core::bounds::lower_bound_certificate;
use fpp_core::engine::omega_ball;
use fpp_core::geodesicity::{
    empirical_sagstar_via_geodesics, monotone_ball_check, sag_sequence, sagstar_deficiency, NormKind, SagProfile,
};
use fpp_core::shape::{
    cauchy_defect, hull_identity_check, induction_trace, shape_error_series, DistanceSource, DoublingProfile, ShapeNorm,
};
use fpp_core::weights::mix64;
use fpp_core::{AuxNorm, OmegaField, Point, PointCloud};
use serde_json::json;

use crate::config::{parse_list, parse_point, ExperimentConfig, MetricKind};
use crate::output::{num, Outputs};
use crate::{suite, CliError, Command, NormChoice};

fn point_or_origin(s: &Option<String>, cfg: &ExperimentConfig) -> Result<Point, CliError> {
    s.as_deref().map_or(Ok(cfg.origin()), |s| parse_point(s, cfg.dim))
}

fn coords(p: &Point) -> impl Iterator<Item = String> + '_ {
    p.coords().iter().map(|c| c.to_string())
}

fn axis_header(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

/// Runs one command; `Ok(false)` means it ran and a check failed.
pub fn dispatch(cfg: &ExperimentConfig, command: &Command, out: &mut Outputs) -> Result<bool, CliError> {
    let t = Instant::now();
    let passed = match command {
        Command::Ball { radius } => ball(cfg, *radius, out)?,
        Command::Avgdist { x, y } => avgdist(cfg, &point_or_origin(x, cfg)?, &parse_point(y, cfg.dim)?, out)?,
        Command::Fluct { radius, thresholds, pairs, sources } => {
            let sampling = PairSampling { max_pairs: *pairs, max_sources: *sources };
            fluct(cfg, *radius, &parse_list(thresholds)?, &sampling, out)?
        }
        Command::Sagstar { from, to, lambda } => {
            sagstar(cfg, &point_or_origin(from, cfg)?, &parse_point(to, cfg.dim)?, *lambda, out)?
        }
        Command::SagSeq { from, to, parts, alpha0 } => {
            let (x, y) = (point_or_origin(from, cfg)?, parse_point(to, cfg.dim)?);
            let r = sag_sequence(cfg.oracle()?.as_ref(), &x, &y, *parts, cfg.search_radius, *alpha0, cfg.point_budget)?;
            out.write_json("sag_seq.json", &r)?;
            true
        }
        Command::Monotone { radius, c } => {
            let profile = SagProfile::average_metric(*c);
            profile.validate()?;
            let r = monotone_ball_check(cfg.oracle()?.as_ref(), &cfg.origin(), *radius, &profile, cfg.point_budget)?;
            out.write_json("monotone.json", &json!({ "profile": profile, "check": r }))?;
            true
        }
        Command::HullCheck { points, sets, n } => hull_check(cfg, points.as_deref(), *sets, &parse_list(n)?, out)?,
        Command::Cauchy { r1, r2 } => {
            let d = with_source(cfg, |src| cauchy_defect(src, &cfg.origin(), *r1, *r2, AuxNorm::Linf, cfg.point_budget))?;
            out.write_json("cauchy.json", &json!({ "r1": r1, "r2": r2, "norm": AuxNorm::Linf, "defect": d }))?;
            true
        }
        Command::Shape { norm, norm_radius, sag_c, c0 } => shape(cfg, *norm, *norm_radius, *sag_c, *c0, out)?,
        Command::Certify { degree } => {
            let q = match degree {
                Some(q) => *q,
                None => cfg.lattice()?.degree(),
            };
            let c = lower_bound_certificate(&cfg.law, q)?;
            out.write_json("certificate.json", &c)?;
            true
        }
        Command::Reproduce { profile, skip_determinism } => {
            let exe = if *skip_determinism { None } else { suite::own_executable() };
            let outcomes = suite::run_all(*profile, exe.as_deref(), out.dir())?;
            suite::write_report(*profile, &outcomes, out)?;
            outcomes.iter().all(|o| o.passed)
        }
    };
    out.record_timing(command.name(), t.elapsed().as_secs_f64());
    Ok(passed)
}

fn with_source<T>(
    cfg: &ExperimentConfig,
    f: impl FnOnce(&DistanceSource) -> fpp_core::Result<T>,
) -> Result<T, CliError> {
    if cfg.metric == MetricKind::Average {
        let ens = cfg.ensemble()?;
        Ok(f(&DistanceSource::Average { ensemble: &ens, batches: cfg.batches })?)
    } else {
        let oracle = cfg.oracle()?;
        Ok(f(&DistanceSource::Exact(oracle.as_ref()))?)
    }
}

fn ball(cfg: &ExperimentConfig, radius: f64, out: &mut Outputs) -> Result<bool, CliError> {
    let field = OmegaField::new(cfg.lattice()?, cfg.law.clone(), cfg.seed)?;
    let b = omega_ball(&field, &cfg.origin(), radius, &cfg.limits())?;
    let mut header = axis_header("x", cfg.dim);
    header.push("dist".into());
    let cloud = b.points();
    let rows: Vec<Vec<String>> = cloud
        .iter()
        .map(|p| coords(p).chain([num(b.distance(p).expect("in ball"))]).collect())
        .collect();
    out.write_csv("ball.csv", &header, &rows)?;
    Ok(true)
}

fn avgdist(cfg: &ExperimentConfig, x: &Point, y: &Point, out: &mut Outputs) -> Result<bool, CliError> {
    let ens = cfg.ensemble()?;
    let m = mean_distance(&ens, x, y, false)?;
    let mut header = axis_header("x", cfg.dim);
    header.extend(axis_header("y", cfg.dim));
    header.extend(["word_distance", "mean", "stderr", "replicas"].map(String::from));
    let d = ens.lattice.graph_distance(x, y);
    let row: Vec<String> =
        coords(x).chain(coords(y)).chain([d.to_string(), num(m.mean), num(m.std_error), m.replicas.to_string()]).collect();
    out.write_csv("avgdist.csv", &header, &[row])?;
    Ok(true)
}

fn fluct(
    cfg: &ExperimentConfig,
    radius: u64,
    thresholds: &[f64],
    sampling: &PairSampling,
    out: &mut Outputs,
) -> Result<bool, CliError> {
    let ens = cfg.ensemble()?;
    let ball = ens.lattice.word_ball(&cfg.origin(), radius, cfg.point_budget)?;
    let pairs = sample_pairs(ball.points(), sampling, mix64(cfg.seed, &[0xf1_0c, radius]));
    let table = fluctuation_table(&ens, &pairs, thresholds)?;
    let mut header = axis_header("x", cfg.dim);
    header.extend(axis_header("y", cfg.dim));
    header.extend(["word_distance", "mean", "sample_std"].map(String::from));
    header.extend(thresholds.iter().map(|u| format!("freq_{u}")));
    header.extend(thresholds.iter().map(|u| format!("envelope_{u}")));
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let env = (0..thresholds.len()).map(|j| table.envelope(i, j).map_or(String::new(), num));
            coords(&r.x)
                .chain(coords(&r.y))
                .chain([r.word_distance.to_string(), num(r.mean), num(r.sample_std)])
                .chain(r.frequencies.iter().map(|f| num(*f)))
                .chain(env)
                .collect()
        })
        .collect();
    out.write_csv("fluct.csv", &header, &rows)?;
    let sup = fluctuation_sup_over(&ens, &pairs, radius)?;
    out.write_json("fluct.json", &json!({ "thresholds": thresholds, "fit": table.fit, "sup": sup }))?;
    Ok(true)
}

fn sagstar(cfg: &ExperimentConfig, x: &Point, y: &Point, lambda: f64, out: &mut Outputs) -> Result<bool, CliError> {
    let doc = if cfg.metric == MetricKind::Average {
        let r = empirical_sagstar_via_geodesics(&cfg.ensemble()?, x, y, lambda, cfg.eval_replicas)?;
        json!({ "method": "geodesic_waypoints", "result": r })
    } else {
        let r = sagstar_deficiency(cfg.oracle()?.as_ref(), x, y, lambda, cfg.search_radius, cfg.point_budget)?;
        json!({ "method": "region_search", "result": r })
    };
    out.write_json("sagstar.json", &doc)?;
    Ok(true)
}

/// Seeded random symmetric subsets of `[−3, 3]²`.
pub fn random_symmetric_sets(seed: u64, count: usize) -> Vec<PointCloud> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k = rng.gen_range(1..=5);
            let mut pts = Vec::with_capacity(2 * k);
            for _ in 0..k {
                let p = Point::from_slice(&[rng.gen_range(-3..=3), rng.gen_range(-3..=3)]);
                pts.push(p);
                pts.push(p.neg());
            }
            PointCloud::from_points(2, pts)
        })
        .collect()
}

fn hull_check(
    cfg: &ExperimentConfig,
    points: Option<&str>,
    sets: usize,
    ns: &[u32],
    out: &mut Outputs,
) -> Result<bool, CliError> {
    let clouds = match points {
        Some(s) => {
            let mut pts = vec![];
            for part in s.split(';').filter(|p| !p.trim().is_empty()) {
                let p = parse_point(part, cfg.dim)?;
                pts.push(p);
                pts.push(p.neg());
            }
            vec![PointCloud::from_points(cfg.dim, pts)]
        }
        None => random_symmetric_sets(cfg.seed, sets),
    };
    let mut reports = vec![];
    let mut rows = vec![];
    for (i, k) in clouds.iter().enumerate() {
        for &n in ns {
            let r = hull_identity_check(k, n, cfg.point_budget)?;
            rows.push(vec![
                i.to_string(),
                n.to_string(),
                num(r.support_max_diff),
                r.lhs_exact.clone(),
                r.rhs_exact.clone(),
                r.passed().to_string(),
            ]);
            reports.push(json!({ "set": i, "points": k.points(), "report": r }));
        }
    }
    let all = rows.iter().all(|r| r[5] == "true");
    out.write_csv("hull_check.csv", &["set", "n", "support_max_diff", "lhs", "rhs", "passed"], &rows)?;
    out.write_json("hull_check.json", &json!({ "all_passed": all, "reports": reports }))?;
    Ok(all)
}

fn shape(
    cfg: &ExperimentConfig,
    norm: NormChoice,
    norm_radius: Option<u64>,
    sag_c: f64,
    c0: f64,
    out: &mut Outputs,
) -> Result<bool, CliError> {
    let shape_norm = match norm {
        NormChoice::Estimated => match norm_radius {
            Some(radius) => ShapeNorm::Estimated { radius },
            None => ShapeNorm::estimated_for(&cfg.radii),
        },
        NormChoice::L1 => ShapeNorm::Given(NormKind::L1),
        NormChoice::L2 => ShapeNorm::Given(NormKind::L2),
        NormChoice::Linf => ShapeNorm::Given(NormKind::Linf),
    };
    let s = with_source(cfg, |src| shape_error_series(src, &cfg.origin(), &cfg.radii, shape_norm, cfg.point_budget))?;
    let rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            let d = r.delta();
            vec![
                r.n.to_string(),
                num(r.delta_in.value),
                num(r.delta_out.value),
                num(d.stderr),
                num(r.delta_in.stderr),
                num(r.delta_out.stderr),
                r.ball_points.to_string(),
            ]
        })
        .collect();
    out.write_csv(
        "shape.csv",
        &["n", "delta_in", "delta_out", "stderr", "stderr_in", "stderr_out", "ball_points"],
        &rows,
    )?;
    // G is only estimable for the average distance (by the mean weight).
    let (g, g_estimated) = match cfg.metric {
        MetricKind::Average => (cfg.law.mean(), true),
        _ => (cfg.oracle()?.upper_lipschitz(), false),
    };
    let measured: Vec<(u64, u64, f64)> = s
        .rows
        .windows(2)
        .filter_map(|w| w[1].cauchy_to_previous.map(|c| (w[0].n, w[1].n, c.value)))
        .collect();
    let trace = induction_trace(g, g_estimated, sag_c, cfg.dim, &DoublingProfile::default(), c0, &measured)?;
    out.write_json("shape.json", &json!({ "series": s, "induction": trace }))?;
    Ok(true)
}
