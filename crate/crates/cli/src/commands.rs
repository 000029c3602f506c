//! The eight experiments. Each one writes its tables and plots, then
//! returns a headline and the list of assertions.

use ncpfr::flow::{build_flow_ops_with, flow_residual_with, verify_d_identity, verify_r_closed_form};
use ncpfr::hilbert::{ht_norm_scan, summarize_ht, testing_conditions};
use ncpfr::jacobi::JacobiMatrix;
use ncpfr::measures::{
    default_n_range, pressure2_exponent, pressure_curve, pressure_root, two_sided_pressure_check,
    weak_pfr_on, PartitionSums,
};
use ncpfr::polydyn::{ExpandingPolynomial, Limits};
use ncpfr::renorm::{
    contraction_estimate, iterate_fixed_point, random_jacobi, renorm_map, scalar_contraction_on,
    start_independence, LipschitzSettings, ScalarContraction,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{num, Artifacts, Assertion, Table};
use crate::svg::{Plot, Series};

pub type Outcome = (String, Vec<Assertion>);

fn verdict(assertions: &[Assertion]) -> &'static str {
    if assertions.iter().all(|a| a.pass) {
        "pass"
    } else {
        "FAIL"
    }
}

fn limits(cfg: &ExperimentConfig) -> Limits {
    Limits::with_max_nodes(cfg.max_d)
}

fn range(cfg: &ExperimentConfig) -> (usize, usize) {
    let [lo, hi] = cfg.n_range();
    (lo, hi)
}

fn plot(title: &str, x: &str, y: &str, log_y: bool, source: &str, series: Vec<Series>) -> Plot {
    Plot {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log_y,
        source: source.into(),
        series,
    }
}

pub fn pressure(cfg: &ExperimentConfig, p: &ExpandingPolynomial, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let r = range(cfg);
    let tol = &cfg.tolerances;
    let sums = PartitionSums::new(p, r.1, 0.0, &limits(cfg))?;
    let curve = pressure_curve(&sums, cfg.t_grid(), r)?;
    let mut table = Table::new(&[("t", "1"), ("P", "log base N"), ("residual", "log base N")]);
    for k in 0..curve.t_grid.len() {
        table.push(vec![num(curve.t_grid[k]), num(curve.p_values[k]), num(curve.residuals[k])]);
    }
    out.csv("pressure.csv", &table)?;
    let points = curve.t_grid.iter().cloned().zip(curve.p_values.iter().cloned()).collect();
    out.svg(
        "pressure.svg",
        &plot("pressure P(t)", "t", "P(t)", false, "pressure.csv", vec![Series { label: "P".into(), points }]),
    )?;

    let p0 = sums.pressure(0.0, r)?.value;
    let p1 = sums.pressure(1.0, r)?.value;
    let two = two_sided_pressure_check(&sums, r, cfg.eps_hat, 22)?;
    let delta = pressure_root(&sums, r).unwrap_or(f64::NAN);
    let (tau, _) = pressure2_exponent(&sums, r)?;
    let assertions = vec![
        Assertion::le("|P(0) - 1|", (p0 - 1.0).abs(), tol.p0),
        Assertion::lt("P(1)", p1, 0.0),
        Assertion::lt("max P(t) + P(2 - t)", two.max, 0.0),
        Assertion::inside("root delta", delta, 0.0, 1.0),
        Assertion::gt("tau", tau, 0.0),
        Assertion::holds("P strictly decreasing on the grid", curve.is_strictly_decreasing()),
    ];
    let headline = format!("P(0)={}, delta={delta:.6}, tau={tau:.6}, {}", num(p0), verdict(&assertions));
    Ok((headline, assertions))
}

fn lipschitz_scan(cfg: &ExperimentConfig, p: &ExpandingPolynomial) -> anyhow::Result<Vec<ScalarContraction>> {
    let pairs = cfg.x.pairs(p, cfg.seed)?;
    let settings = LipschitzSettings {
        precision: cfg.precision(),
        max_nodes: cfg.max_d,
        ..LipschitzSettings::default()
    };
    let r = range(cfg);
    Ok(cfg
        .t_grid()
        .iter()
        .map(|&t| scalar_contraction_on(p, t, r, &pairs, &settings))
        .collect::<ncpfr::Result<_>>()?)
}

fn lipschitz_outputs(name: &str, runs: &[ScalarContraction], out: &mut Artifacts) -> anyhow::Result<()> {
    let mut table = Table::new(&[("t", "1"), ("n", "level"), ("d", "nodes"), ("L_n", "operator norm per unit x")]);
    for run in runs {
        for row in &run.rows {
            table.push(vec![num(run.t), row.n.to_string(), row.dim.to_string(), num(row.l_n)]);
        }
    }
    let csv = format!("{name}.csv");
    out.csv(&csv, &table)?;
    let series = runs
        .iter()
        .map(|run| Series {
            label: format!("t={}", run.t),
            points: run.rows.iter().map(|r| (r.n as f64, r.l_n)).collect(),
        })
        .collect();
    out.svg(&format!("{name}.svg"), &plot("L_n against n", "n", "L_n", true, &csv, series))
}

pub fn lipschitz(cfg: &ExperimentConfig, p: &ExpandingPolynomial, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let runs = lipschitz_scan(cfg, p)?;
    lipschitz_outputs("lipschitz", &runs, out)?;
    let assertions: Vec<Assertion> = runs
        .iter()
        .map(|run| {
            Assertion::le(
                format!("t={}: max L_n / max(L_lo, L_lo+1)", run.t),
                run.growth_ratio(),
                cfg.tolerances.growth_max,
            )
        })
        .collect();
    let worst = runs.iter().map(|r| r.growth_ratio()).fold(0.0, f64::max);
    Ok((format!("max growth={worst:.4}, {}", verdict(&assertions)), assertions))
}

pub fn contraction(cfg: &ExperimentConfig, p: &ExpandingPolynomial, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let runs = lipschitz_scan(cfg, p)?;
    lipschitz_outputs("contraction", &runs, out)?;
    let tol = &cfg.tolerances;
    let mut assertions = Vec::new();
    for run in &runs {
        assertions.push(Assertion::le(format!("t={}: c_hat", run.t), run.c_hat, tol.c_max));
        assertions.push(Assertion::ge(format!("t={}: R^2", run.t), run.fit.r_squared, tol.r2_min));
    }
    let c = runs.iter().map(|r| r.c_hat).fold(0.0, f64::max);
    Ok((format!("c_hat={c:.4}, {}", verdict(&assertions)), assertions))
}

pub fn hilbert_norm(cfg: &ExperimentConfig, p: &ExpandingPolynomial, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let xs = cfg.x.points(p, cfg.seed)?;
    let rows = ht_norm_scan(p, cfg.t_grid(), range(cfg), &xs)?;
    let tol = &cfg.tolerances;
    let mut table = Table::new(&[
        ("t", "1"),
        ("n", "level"),
        ("x", "1"),
        ("d", "nodes"),
        ("ht_norm", "operator norm"),
        ("b_norm", "operator norm"),
        ("diag_norm", "operator norm"),
        ("flow_norm", "operator norm"),
    ]);
    for r in &rows {
        table.push(vec![
            num(r.t),
            r.n.to_string(),
            num(r.x),
            r.dim.to_string(),
            num(r.ht_norm),
            num(r.b_norm),
            num(r.diag_norm),
            num(r.flow_norm),
        ]);
    }
    out.csv("hilbert-norm.csv", &table)?;
    let series = cfg
        .t_grid()
        .iter()
        .map(|&t| {
            let (lo, hi) = range(cfg);
            let points = (lo..=hi)
                .map(|n| {
                    let m = rows.iter().filter(|r| r.t == t && r.n == n).map(|r| r.ht_norm).fold(0.0, f64::max);
                    (n as f64, m)
                })
                .collect();
            Series {
                label: format!("t={t}"),
                points,
            }
        })
        .collect();
    out.svg(
        "hilbert-norm.svg",
        &plot("sup over x of the Hilbert matrix norm", "n", "norm", false, "hilbert-norm.csv", series),
    )?;

    let mut assertions: Vec<Assertion> = summarize_ht(&rows, tol.small_n_max)
        .iter()
        .map(|s| Assertion::le(format!("t={}: max_n norm / max_(n<={}) norm", s.t, tol.small_n_max), s.ratio, tol.ht_ratio_max))
        .collect();
    let baseline = rows.iter().filter(|r| r.n <= tol.small_n_max).map(|r| r.diag_norm).fold(0.0, f64::max);
    let diag = rows.iter().map(|r| r.diag_norm).fold(0.0, f64::max);
    assertions.push(Assertion::le("diagonal / fitted small-n bound", diag / baseline, tol.diag_factor));
    let sup = rows.iter().map(|r| r.ht_norm).fold(0.0, f64::max);
    Ok((format!("sup norm={sup:.4}, {}", verdict(&assertions)), assertions))
}

pub fn test_conditions(cfg: &ExperimentConfig, p: &ExpandingPolynomial, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let n = range(cfg).1;
    let tol = &cfg.tolerances;
    let eps = cfg.eps_hat;
    let pr = default_n_range(p.degree());
    let sums = PartitionSums::new(p, pr.1, 0.0, &limits(cfg))?;
    let reports = cfg
        .t_grid()
        .par_iter()
        .map(|&t| testing_conditions(p, n, t, eps, cfg.random_intervals, cfg.seed))
        .collect::<ncpfr::Result<Vec<_>>>()?;

    let mut profile = Table::new(&[
        ("t", "1"),
        ("k", "level"),
        ("n_minus_k", "levels"),
        ("count", "intervals"),
        ("sup_box", "1"),
        ("sup_poisson", "1"),
    ]);
    let mut fits = Table::new(&[
        ("t", "1"),
        ("poisson_exponent", "per level base N"),
        ("two_tau0", "per level base N"),
        ("delta_hat", "1"),
        ("random_ratio", "1"),
    ]);
    let mut assertions = Vec::new();
    let mut series = Vec::new();
    for rep in &reports {
        let t = rep.t;
        for row in &rep.profile {
            profile.push(vec![
                num(t),
                row.k.to_string(),
                (n - row.k).to_string(),
                row.count.to_string(),
                num(row.sup_box),
                num(row.sup_poisson),
            ]);
        }
        series.push(Series {
            label: format!("t={t}"),
            points: rep.profile.iter().map(|r| ((n - r.k) as f64, r.sup_poisson)).collect(),
        });
        let tp = t + eps * t - eps;
        let tau0 = -(sums.pressure(tp, pr)?.value + sums.pressure(2.0 - tp, pr)?.value);
        let target = 2.0 * tau0;
        fits.push(vec![num(t), num(rep.poisson_exponent), num(target), num(rep.delta_hat()), num(rep.random_ratio())]);
        assertions.push(Assertion::holds(format!("t={t}: profile decreasing in n-k"), rep.monotone));
        assertions.push(Assertion::le(
            format!("t={t}: |exponent / 2tau0 - 1|"),
            (rep.poisson_exponent / target - 1.0).abs(),
            tol.exponent_rel,
        ));
        assertions.push(Assertion::gt(format!("t={t}: doubling delta"), rep.delta_hat(), 0.0));
        assertions.push(Assertion::le(
            format!("t={t}: random / dyadic sup"),
            rep.random_ratio(),
            tol.random_ratio_max,
        ));
    }
    out.csv("test-conditions.csv", &profile)?;
    out.csv("test-conditions-fit.csv", &fits)?;
    out.svg(
        "test-conditions.svg",
        &plot(
            "level profile of the Poisson product",
            "n - k",
            "sup P_I u P_I v",
            true,
            "test-conditions.csv",
            series,
        ),
    )?;
    let failed = assertions.iter().filter(|a| !a.pass).count();
    Ok((format!("{failed} of {} assertions failed, {}", assertions.len(), verdict(&assertions)), assertions))
}

pub fn flow_check(cfg: &ExperimentConfig, p: &ExpandingPolynomial, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let xs = cfg.x.points(p, cfg.seed)?;
    let (lo, hi) = range(cfg);
    let precision = cfg.precision();
    let mut grid = Vec::new();
    for &t in cfg.t_grid() {
        for n in lo..=hi {
            for &x in &xs {
                grid.push((t, n, x));
            }
        }
    }
    let rows = grid
        .par_iter()
        .map(|&(t, n, x)| -> ncpfr::Result<[f64; 8]> {
            let ops = build_flow_ops_with(p, n, t, x, precision)?;
            let d = verify_d_identity(&ops);
            let r = verify_r_closed_form(&ops);
            let r3 = flow_residual_with(&ops, p, 1e-3)?;
            let r4 = flow_residual_with(&ops, p, 1e-4)?;
            Ok([
                ops.dim() as f64,
                d.rows_residual,
                d.last_row_residual,
                d.lar2_residual,
                r.max_residual(),
                r3,
                r4,
                r3 / r4,
            ])
        })
        .collect::<ncpfr::Result<Vec<_>>>()?;
    let mut table = Table::new(&[
        ("t", "1"),
        ("n", "level"),
        ("x", "1"),
        ("d", "nodes"),
        ("rows_residual", "abs"),
        ("last_row_residual", "abs"),
        ("lar2_residual", "abs"),
        ("r_residual", "abs"),
        ("residual_h1e-3", "operator norm"),
        ("residual_h1e-4", "operator norm"),
        ("ratio", "1"),
    ]);
    for (&(t, n, x), v) in grid.iter().zip(&rows) {
        let mut row = vec![num(t), n.to_string(), num(x), (v[0] as usize).to_string()];
        row.extend(v[1..].iter().map(|&y| num(y)));
        table.push(row);
    }
    out.csv("flow-check.csv", &table)?;
    let series = cfg
        .t_grid()
        .iter()
        .map(|&t| Series {
            label: format!("t={t}, h=1e-4"),
            points: (lo..=hi)
                .map(|n| {
                    let m = grid
                        .iter()
                        .zip(&rows)
                        .filter(|(g, _)| g.0 == t && g.1 == n)
                        .map(|(_, v)| v[6])
                        .fold(0.0, f64::max);
                    (n as f64, m)
                })
                .collect(),
        })
        .collect();
    out.svg(
        "flow-check.svg",
        &plot("flow equation residual", "n", "residual", true, "flow-check.csv", series),
    )?;

    let tol = &cfg.tolerances;
    let max = |k: usize| rows.iter().map(|v| v[k]).fold(0.0, f64::max);
    let min_ratio = rows.iter().map(|v| v[7]).fold(f64::INFINITY, f64::min);
    let assertions = vec![
        Assertion::le("commutator rows except last", max(1), tol.identity),
        Assertion::le("commutator last row", max(2), tol.identity),
        Assertion::le("last row normalization", max(3), tol.identity),
        Assertion::le("R closed form", max(4), tol.identity),
        Assertion::within("min residual ratio h=1e-3 / h=1e-4", min_ratio, tol.flow_ratio[0], tol.flow_ratio[1]),
        Assertion::within("max residual ratio h=1e-3 / h=1e-4", max(7), tol.flow_ratio[0], tol.flow_ratio[1]),
        Assertion::le("max residual at h=1e-4", max(6), tol.flow_abs),
    ];
    Ok((format!("max residual={:.2e}, {}", max(6), verdict(&assertions)), assertions))
}

pub fn renorm(cfg: &ExperimentConfig, p: &ExpandingPolynomial, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let tol = &cfg.tolerances;
    let (lo, hi) = range(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut re_table = Table::new(&[("m", "size"), ("n", "level"), ("re_residual", "abs")]);
    let mut re: f64 = 0.0;
    for m in [1, 2, 4, 8] {
        let jt = random_jacobi(m, &mut rng)?;
        for n in lo..=hi {
            let r = renorm_map(p, n, &jt)?.max_re_residual();
            re = re.max(r);
            re_table.push(vec![m.to_string(), n.to_string(), num(r)]);
        }
    }
    out.csv("renorm-re.csv", &re_table)?;

    let c = contraction_estimate(p, 1, 4, 10, cfg.seed)?;
    let mut pairs = Table::new(&[("pair_id", "1"), ("in_distance", "coeff"), ("out_distance", "coeff"), ("ratio", "1")]);
    for s in &c.samples {
        pairs.push(vec![s.pair.to_string(), num(s.in_distance), num(s.out_distance), num(s.ratio)]);
    }
    out.csv("renorm-pairs.csv", &pairs)?;

    let limits = limits(cfg);
    let a = iterate_fixed_point(p, &JacobiMatrix::scalar(0.0), 5, 3, &limits)?;
    let b = iterate_fixed_point(p, &JacobiMatrix::new(vec![0.0, 0.0], vec![1.0])?, 5, 3, &limits)?;
    let indep = start_independence(&a, &b);
    let long = iterate_fixed_point(p, &JacobiMatrix::scalar(0.0), 9, 4, &limits)?;
    let mut defects = Table::new(&[("l", "level"), ("period", "rows"), ("defect_a", "abs"), ("defect_b", "abs")]);
    for d in &long.defects {
        defects.push(vec![d.l.to_string(), d.period.to_string(), num(d.defect_a), num(d.defect_b)]);
    }
    out.csv("renorm.csv", &defects)?;
    let series = vec![Series {
        label: "defect".into(),
        points: long.defects.iter().map(|d| (d.l as f64, d.defect())).collect(),
    }];
    out.svg(
        "renorm.svg",
        &plot("almost-periodicity defect", "l", "defect", true, "renorm.csv", series),
    )?;

    let mut assertions = vec![
        Assertion::le("max RE residual", re, tol.re),
        Assertion::le("contraction c_hat", c.c_hat, tol.renorm_c_max),
        Assertion::le("start independence", indep, tol.independence),
    ];
    for (l, r) in long.defect_ratios().iter().take(3).enumerate() {
        assertions.push(Assertion::le(format!("defect ratio l={}", l + 1), *r, tol.defect_ratio_max));
    }
    Ok((format!("c_hat={:.4}, {}", c.c_hat, verdict(&assertions)), assertions))
}

pub fn weak_pfr(cfg: &ExperimentConfig, p: &ExpandingPolynomial, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let pairs = cfg.x.pairs(p, cfg.seed)?;
    let limits = limits(cfg);
    let runs = cfg
        .t_grid()
        .iter()
        .map(|&t| weak_pfr_on(p, t, range(cfg), cfg.probe, cfg.gamma, &pairs, &limits))
        .collect::<ncpfr::Result<Vec<_>>>()?;
    let mut table = Table::new(&[("t", "1"), ("n", "level"), ("E_n", "abs per |dx|^gamma")]);
    for run in &runs {
        for row in &run.rows {
            table.push(vec![num(run.t), row.n.to_string(), num(row.e_n)]);
        }
    }
    out.csv("weak-pfr.csv", &table)?;
    let series = runs
        .iter()
        .map(|run| Series {
            label: format!("t={}", run.t),
            points: run.rows.iter().map(|r| (r.n as f64, r.e_n)).collect(),
        })
        .collect();
    out.svg(
        "weak-pfr.svg",
        &plot("difference of integrals against n", "n", "E_n", true, "weak-pfr.csv", series),
    )?;
    let assertions: Vec<Assertion> = runs
        .iter()
        .map(|run| Assertion::lt(format!("t={}: q_hat", run.t), run.q_hat, cfg.tolerances.q_max))
        .collect();
    let q = runs.iter().map(|r| r.q_hat).fold(0.0, f64::max);
    Ok((format!("q_hat={q:.4}, {}", verdict(&assertions)), assertions))
}
