//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not hidden; the process exits non-zero
//! on a FAIL only when `RHOHARM_ACCEPTANCE_STRICT` is set.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rhoharm::exponents::{luxemburg_norm, ExponentField};
use rhoharm::grid::{make_grid, unit_ball_volume, Grid, GridFunction};
use rhoharm::harness::{emit_report, run_suite, ExperimentConfig, RatioReport, ReportFormat, SuiteName};
use rhoharm::maximal::BallFamily;
use rhoharm::potential::{critical_radius, verify_rho_bounds, CriticalRadiusField, PotentialField};
use rhoharm::schrodinger::{build_l, matrix_function, MatrixFn};
use rhoharm::weights::{apvar_constant, apvar_loc_constant, apvar_rho_constant, WeightField};

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> GridFunction {
    GridFunction::from_fn(grid, |_| rng.random_range(lo..hi))
}

fn suite(text: &str) -> std::result::Result<RatioReport, String> {
    let cfg = ExperimentConfig::parse(text).map_err(|e| e.to_string())?;
    run_suite(&cfg).map_err(|e| e.to_string())
}

/// `label: C (growth g)` for every gated series.
fn summary(r: &RatioReport) -> String {
    r.series
        .iter()
        .filter(|s| s.gated)
        .map(|s| {
            let g: Vec<String> = s.growth.iter().map(|g| format!("{:.3}", g.0)).collect();
            format!(
                "{}: C={:.4} growth=[{}]{}",
                s.label,
                s.max_ratio.0,
                g.join(","),
                if s.pass { "" } else { " ✗" }
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn c1_luxemburg() -> Outcome {
    let g = make_grid(3, 16, 0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for p0 in [1.5, 2.0, 3.0] {
        let p = ExponentField::constant(&g, p0).unwrap();
        for _ in 0..100 {
            let f = random_field(&g, &mut rng, -2.0, 2.0);
            let exact = (f.values().iter().map(|v| v.abs().powf(p0)).sum::<f64>() * g.cell_measure()).powf(1.0 / p0);
            worst = worst.max(rel(luxemburg_norm(&f, &p).unwrap(), exact));
        }
    }
    check(worst <= 1e-8, format!("300 fields on 16³, worst relative error {worst:.2e} (tol 1e-8)"))
}

fn c2_power_identity() -> Outcome {
    let g = make_grid(3, 12, 0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let s = if i % 2 == 0 { 0.5 } else { 2.0 };
        let f = random_field(&g, &mut rng, -3.0, 3.0);
        // s·p must stay above 1.
        let values: Vec<f64> = (0..g.len()).map(|_| rng.random_range(2.1..4.0)).collect();
        let p_inf = values[0];
        let p = ExponentField::new(&g, values, p_inf).unwrap();
        let lhs = luxemburg_norm(&f.abs().map(|v| v.powf(s)), &p).unwrap();
        let rhs = luxemburg_norm(&f, &p.scaled(s).unwrap()).unwrap().powf(s);
        worst = worst.max(rel(lhs, rhs));
    }
    check(worst <= 1e-8, format!("100 triples on 12³, worst relative error {worst:.2e} (tol 1e-8)"))
}

/// Ladder rungs lying in `(min(a,b), max(a,b)]`.
fn ladder_steps(grid: &Grid, a: f64, b: f64) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    grid.ladder().iter().filter(|&&r| r > lo * (1.0 + 1e-12) && r <= hi * (1.0 + 1e-12)).count()
}

fn c3_critical_radius() -> Outcome {
    let g = make_grid(3, 32, 0.125).unwrap();
    let rho = |c: f64| critical_radius(&PotentialField::constant(&g, c).unwrap());
    let mut worst = 0;
    let mut fields = Vec::new();
    for c in [0.25, 1.0, 4.0] {
        let r = rho(c);
        let exact = (c * unit_ball_volume(3)).powf(-0.5);
        let steps = r.values().iter().map(|&v| ladder_steps(&g, v, exact)).max().unwrap();
        worst = worst.max(steps);
        fields.push((c, r));
    }
    let mut ratio_steps = 0;
    for (c, r) in &fields {
        if let Some((_, r4)) = fields.iter().find(|(c4, _)| *c4 == 4.0 * c) {
            let s = r
                .values()
                .iter()
                .zip(r4.values())
                .map(|(&a, &b)| ladder_steps(&g, b, a / 2.0))
                .max()
                .unwrap();
            ratio_steps = ratio_steps.max(s);
        }
    }
    let capped: f64 = fields.iter().map(|(_, r)| r.capped_fraction()).fold(0.0, f64::max);
    check(
        worst <= 2 && ratio_steps <= 2 && capped == 0.0,
        format!("32³: max {worst} ladder steps from (cω₃)^(-1/2); ρ(4c) vs ρ(c)/2 within {ratio_steps} steps; capped fraction {capped}"),
    )
}

fn c4_rho_bounds() -> Outcome {
    let report = |n: usize| {
        let g = make_grid(3, n, 0.25).unwrap();
        let rho: CriticalRadiusField = critical_radius(&PotentialField::oscillator(&g).unwrap());
        verify_rho_bounds(&rho, 20_000)
    };
    let coarse = report(8).map_err(|e| format!("8³: {e}"))?;
    let fine = report(12).map_err(|e| format!("12³: {e}"))?;
    let dc = coarse.c_index.abs_diff(fine.c_index);
    let dn = coarse.n_index.abs_diff(fine.n_index);
    check(
        dc <= 1 && dn <= 1 && fine.max_violation <= 0.0,
        format!(
            "oscillator: 8³ (c, N) = ({}, {}), 12³ (c, N) = ({}, {}); lattice offset ({dc}, {dn})",
            coarse.c_rho, coarse.n_rho, fine.c_rho, fine.n_rho
        ),
    )
}

fn c5_weight_chain() -> Outcome {
    let g = make_grid(3, 8, 0.5).unwrap();
    let rho = critical_radius(&PotentialField::constant(&g, 1.0).unwrap());
    let ladder = BallFamily::ladder(&g);
    let local = BallFamily::critical(&rho, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let slack = 1e-9;
    let (mut chain_bad, mut dual_bad) = (0, 0);
    for _ in 0..20 {
        let w = WeightField::new(random_field(&g, &mut rng, 0.2, 5.0), "random").unwrap();
        let pv: Vec<f64> = (0..g.len()).map(|_| rng.random_range(1.3..4.0)).collect();
        let p = ExponentField::new(&g, pv.clone(), pv[0]).unwrap();
        let loc = apvar_loc_constant(&w, &p, &local).unwrap().constant;
        let all = apvar_constant(&w, &p, &ladder).unwrap().constant;
        for theta in [0.0, 1.0, 2.0, 4.0] {
            let k = 2f64.powf(theta);
            let r = apvar_rho_constant(&w, &p, &rho, theta, &ladder).unwrap().constant;
            if !(loc <= k * r * (1.0 + slack) && k * r <= k * all * (1.0 + slack)) {
                chain_bad += 1;
            }
            let d = apvar_rho_constant(&w.inverse(), &p.conjugate(), &rho, theta, &ladder).unwrap().constant;
            if d != r {
                dual_bad += 1;
            }
        }
    }
    check(
        chain_bad == 0 && dual_bad == 0,
        format!("20 (w, p) × θ∈{{0,1,2,4}} on 8³: {chain_bad} chain violations, {dual_bad} duality mismatches"),
    )
}

fn gate(r: &RatioReport) -> Outcome {
    check(r.pass, summary(r))
}

fn c6_lerner() -> Outcome {
    let r = suite(
        "[experiment]\nsuite = lerner\n[grid]\ndim = 3\nlevels = 12, 16\n[potential]\nspec = const:1\n\
         [ensemble]\nsize = 128\n[thresholds]\nlerner = 64\n",
    )?;
    gate(&r)
}

fn c7_fefferman_stein() -> Outcome {
    let r = suite(
        "[experiment]\nsuite = fefferman_stein\n[grid]\ndim = 3\nlevels = 12, 16\n[potential]\nspec = const:1\n\
         [exponent]\nspec = radial:2,0.5\n[weight]\nspec = power:1\n[suite]\nbeta = 1, 2, 4\n[ensemble]\nsize = 128\n",
    )?;
    gate(&r)
}

fn c8_sharp_pointwise() -> Outcome {
    let r = suite(
        "[experiment]\nsuite = sharp_pointwise\n[grid]\ndim = 3\nspacing = 0.5\nlevels = 10, 12\n[potential]\nspec = const:1\n\
         [suite]\ndelta = 0.5\nbeta = 1, 2, 4\n[ensemble]\nsize = 64\n",
    )?;
    gate(&r)
}

fn c9_rdf() -> Outcome {
    let r = suite(
        "[experiment]\nsuite = rdf_majorant\n[grid]\ndim = 2\nlevels = 16\n[potential]\nspec = const:1\n\
         [exponent]\nspec = radial:2,0.5\n[suite]\nterms = 16\ntail_slack = 0.000244140625\n[thresholds]\nrdf_majorant = 4\n",
    )?;
    let mut detail = format!("{}; reported {}: C={:.4}", summary(&r), r.series[1].label, r.series[1].max_ratio.0);
    let fine = r.series[0].levels.last().unwrap();
    for key in ["norm_bound", "n_rho", "max_norm_ratio", "max_fixed_point_excess", "max_tail_ratio"] {
        detail.push_str(&format!("; {key}={:.3e}", fine.extras[key].0));
    }
    for n in &r.series[0].notes {
        detail.push_str(&format!("; {n}"));
    }
    check(r.pass, detail)
}

fn c10_spectral() -> Outcome {
    let g = make_grid(1, 4, 1.0).unwrap();
    let l = build_l(&PotentialField::constant(&g, 1.0).unwrap()).map_err(|e| e.to_string())?;
    let ev = l.eigenvalues().unwrap();
    let eig_err = ev.iter().zip([1.0, 3.0, 3.0, 5.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let g3 = make_grid(3, 6, 0.5).unwrap();
    let l3 = build_l(&PotentialField::oscillator(&g3).unwrap()).map_err(|e| e.to_string())?;
    let half = matrix_function(&l3, MatrixFn::InvSqrt).unwrap();
    let inv = matrix_function(&l3, MatrixFn::Inv).unwrap();
    let a = &half.matrices()[0];
    let prod: Mat<f64> = a * a;
    let inv_m = &inv.matrices()[0];
    let scale = (0..g3.len()).map(|i| inv_m[(i, i)].abs()).fold(0.0, f64::max);
    let comp_err = (&prod - inv_m).norm_max() / scale;

    let mut unit_err = 0.0f64;
    for alpha in [0.5, 2.0] {
        let u = matrix_function(&l3, MatrixFn::PowerIAlpha(alpha)).unwrap();
        let (re, im) = (&u.matrices()[0], &u.matrices()[1]);
        let real: Mat<f64> = re * re.transpose() + im * im.transpose();
        let imag: Mat<f64> = im * re.transpose() - re * im.transpose();
        let eye = Mat::<f64>::identity(g3.len(), g3.len());
        unit_err = unit_err.max((&real - &eye).norm_max()).max(imag.norm_max());
    }
    check(
        eig_err <= 1e-10 && comp_err <= 1e-8 && unit_err <= 1e-8,
        format!("eigenvalue error {eig_err:.1e}; inv_sqrt² vs inv {comp_err:.1e}; L^(iα) unitarity {unit_err:.1e}"),
    )
}

fn c11_kernels() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for v in ["const:1", "oscillator"] {
        let r = suite(&format!(
            "[experiment]\nsuite = kernel_conditions\n[grid]\ndim = 3\nlevels = 10, 12\n[potential]\nspec = {v}\nq = 3\n\
             [operator]\nnames = R2*, M_gamma, N_gamma\ngamma = 1\n[suite]\nkernel_n = 1, 2, 3\nkernel_q_pointwise = inf\n"
        ))?;
        ok &= r.pass;
        parts.push(format!("V={v}: {}", summary(&r)));
    }
    check(ok, parts.join(" | "))
}

const SECTION5: &str = "R1, R1*, R2, R2*, M_gamma, M_gamma*, N_gamma, N_gamma*, V_half_Linv_half, \
Linv_half_V_half, V_Linv, Linv_V, V_half_grad_Linv, Linv_grad_V_half, L_i_alpha, L_i_alpha*";

fn c12_operators() -> Outcome {
    let r = suite(&format!(
        "[experiment]\nsuite = operator_bounded\n[grid]\ndim = 3\nspacing = 0.5\nlevels = 10, 12\n[potential]\nspec = const:1\nq = 6\n\
         [exponent]\nspec = radial:2,0.5\n[weight]\nspec = power:0.5\n[operator]\nnames = {SECTION5}\n[ensemble]\nsize = 64\n"
    ))?;
    let pairing = r
        .series
        .iter()
        .flat_map(|s| s.levels.iter().map(|l| l.extras["pairing_error"].0))
        .fold(0.0, f64::max);
    check(r.pass, format!("{}; worst pairing defect {pairing:.1e}", summary(&r)))
}

fn c13_negative_control() -> Outcome {
    let r = suite(
        "[experiment]\nsuite = operator_bounded\n[grid]\ndim = 3\nspacing = 0.5\nlevels = 10, 12\n[potential]\nspec = const:1\n\
         [exponent]\nspec = radial:2,0.5\n[weight]\nspec = exp:2\n[operator]\nnames = identity, R1, M_gamma, V_Linv\n\
         [ensemble]\nsize = 64\n[suite]\nweight_condition = false\n",
    )?;
    let bound = r.thresholds.growth;
    let tripped: Vec<&str> = r
        .series
        .iter()
        .filter(|s| s.growth.iter().any(|g| !(g.0 <= bound)))
        .map(|s| s.label.as_str())
        .collect();
    check(
        !tripped.is_empty() && !r.pass,
        format!("exp weight: growth gate tripped by [{}]; {}", tripped.join(", "), summary(&r)),
    )
}

fn c14_reproducibility() -> Outcome {
    let base = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut differing = Vec::new();
    for s in SuiteName::ALL {
        let extra = match s {
            SuiteName::RdfMajorant => "[suite]\nrho_pairs = 2000\nterms = 8\n",
            SuiteName::KernelConditions => {
                "[suite]\nkernel_centers = 8\nkernel_points = 2\n[operator]\nnames = M_gamma\n[grid]\nspacing = 0.25\nlevels = 10, 12\n"
            }
            SuiteName::OperatorBounded => "[operator]\nnames = R1, L_i_alpha\n",
            _ => "",
        };
        let text = format!(
            "[experiment]\nsuite = {s}\nname = {s}\n[grid]\ndim = 3\nspacing = 0.5\nlevels = 6, 8\n[ensemble]\nsize = 12\n\
             [weight]\nspec = power:0.5\n{extra}"
        );
        let cfg = ExperimentConfig::parse(&text).map_err(|e| e.to_string())?;
        let formats = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Plotdata];
        let mut files = Vec::new();
        for run in 0..2 {
            let dir = base.path().join(format!("{s}-{run}"));
            let r = run_suite(&cfg).map_err(|e| format!("{s}: {e}"))?;
            files.push(emit_report(&r, &dir, &formats).map_err(|e| e.to_string())?);
        }
        for (a, b) in files[0].iter().zip(&files[1]) {
            if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
                differing.push(format!("{}", a.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    check(
        differing.is_empty(),
        format!("9 suites × json/csv/dat, byte-compared over two runs; differing: [{}]", differing.join(", ")),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("Luxemburg norm matches closed form for constant exponents", c1_luxemburg),
        ("power identity ‖|f|^s‖_p = ‖f‖_{sp}^s", c2_power_identity),
        ("critical radius of constant potentials", c3_critical_radius),
        ("feasible (c_ρ, N_ρ), stable lattice cell", c4_rho_bounds),
        ("weight-class chain and duality", c5_weight_chain),
        ("Lerner suite", c6_lerner),
        ("Fefferman–Stein suite", c7_fefferman_stein),
        ("pointwise sharp-of-maximal suite", c8_sharp_pointwise),
        ("Rubio de Francia majorant", c9_rdf),
        ("spectral correctness", c10_spectral),
        ("kernel conditions", c11_kernels),
        ("operator boundedness suites", c12_operators),
        ("negative control fails its growth gate", c13_negative_control),
        ("bit-identical reruns", c14_reproducibility),
    ];
    let only: Option<Vec<usize>> = std::env::var("RHOHARM_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    let total = Instant::now();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} — {name} ({secs:.1}s): {detail}");
    }
    println!(
        "acceptance: {failed} failing criteria, {:.0}s total",
        total.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var_os("RHOHARM_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
