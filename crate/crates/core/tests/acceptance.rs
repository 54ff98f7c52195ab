//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use dnslab::admissibility::{check_admissible, ClassifyConfig, NormSet, RadialProfile, Verdict};
use dnslab::diagnostics::{cauchy_schwarz_check, conserved_quantities};
use dnslab::grid::Boundary;
use dnslab::krylov::KrylovConfig;
use dnslab::momentum::{advance_momentum_h, advance_momentum_varphi, MomentumForm, MomentumStepConfig};
use dnslab::ops::{lame_solve, Lame};
use dnslab::picard::{continuation, solve_nonlinear, solve_slab, ContinuationPlan, PicardConfig};
use dnslab::reform::{relation_residuals, to_reform};
use dnslab::study::{refinement_study, transport_order_study, OracleCase, OracleQuantity, OracleStudyConfig, RefinementConfig};
use dnslab::transport::{Method, TransportScheme};
use dnslab::{admissibility::fit_log_slope, Grid, Params, PrimitiveState, ScalarField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Drifts at or below this are round-off and count as shrinking.
const ROUNDOFF: f64 = 1e-13;

struct Report {
    lines: Vec<(usize, bool, String)>,
    krylov_worst: f64,
}

impl Report {
    fn add(&mut self, id: usize, pass: bool, detail: String) {
        println!("criterion {id:>2}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, detail));
    }

    fn fail(&mut self, id: usize, e: dnslab::Error) {
        self.add(id, false, format!("error: {e}"));
    }

    fn krylov(&mut self, r: f64) {
        self.krylov_worst = self.krylov_worst.max(r);
    }
}

fn smooth_periodic(g: &Grid) -> dnslab::Result<PrimitiveState> {
    let rho = ScalarField::from_fn(g, |x| 1.0 + 0.2 * (2.0 * PI * x[0]).sin());
    let u = VectorField::from_fn(g, |x| [0.5 + 0.1 * (2.0 * PI * x[0]).sin(), 0.0, 0.0]);
    Ok(PrimitiveState::new(rho, u, 0.0))
}

fn shrinks(a: f64, b: f64, factor: f64) -> bool {
    a <= ROUNDOFF && b <= ROUNDOFF || a / b >= factor
}

/// Criteria 1-3 share one refinement study.
fn conservation_suite(rep: &mut Report) -> dnslab::Result<()> {
    let p = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
    let grid = Grid::periodic_1d(512, 1.0)?;
    let mut cfg = PicardConfig::new(1e-3);
    cfg.momentum = MomentumStepConfig::default().with_theta(0.5);
    cfg.monitors = false;
    let study = RefinementConfig { levels: vec![512, 1024] };
    let t = refinement_study(smooth_periodic, &p, &grid, 0.1, &cfg, &study)?;
    let (a, b) = (&t.rows[0], &t.rows[1]);
    rep.krylov(a.krylov_residual.max(b.krylov_residual));
    let ok1 = a.mass_drift <= 1e-6
        && a.momentum_drift <= 1e-5
        && shrinks(a.mass_drift, b.mass_drift, 3.0)
        && shrinks(a.momentum_drift, b.momentum_drift, 3.0)
        && a.wall_time_s <= 60.0
        && a.picard_converged;
    rep.add(
        1,
        ok1,
        format!(
            "mass drift {:.2e} -> {:.2e}, momentum drift {:.2e} -> {:.2e} (x{:.2}), N=512 runtime {:.2}s",
            a.mass_drift,
            b.mass_drift,
            a.momentum_drift,
            b.momentum_drift,
            a.momentum_drift / b.momentum_drift,
            a.wall_time_s
        ),
    );
    let ok2 = a.energy_residual <= 5e-4
        && shrinks(a.energy_residual, b.energy_residual, 2.0)
        && a.energy_increase <= 1e-10
        && b.energy_increase <= 1e-10;
    rep.add(
        2,
        ok2,
        format!(
            "|E+D-E0|/E0 {:.2e} -> {:.2e} (x{:.2}), max E(t)-E0 {:.2e}",
            a.energy_residual,
            b.energy_residual,
            a.energy_residual / b.energy_residual,
            a.energy_increase.max(b.energy_increase)
        ),
    );
    let ok3 = a.nondecay_margin >= -1e-4 && b.nondecay_margin >= -1e-4;
    rep.add(3, ok3, format!("min_t sup|u| - |M0|/m0 = {:.3e}", a.nondecay_margin.min(b.nondecay_margin)));
    Ok(())
}

fn cauchy_schwarz(rep: &mut Report) -> dnslab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=3);
        let n = [0, 64, 12, 6][dim];
        let boundary = if rng.gen_bool(0.5) { Boundary::Periodic } else { Boundary::FarField };
        let g = Grid::uniform(dim, n, -1.0, 2.0, boundary)?;
        let p = Params::new(rng.gen_range(0.1..3.0), rng.gen_range(1.1..3.0), rng.gen_range(0.1..0.95), 1.0, 0.0).with_dim(dim);
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let rho: ScalarField = (0..g.len()).map(|_| scale * rng.gen_range(1e-3..1.0)).collect();
        let u = VectorField((0..dim).map(|_| (0..g.len()).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect());
        let s = PrimitiveState::new(rho, u, 0.0);
        let margin = cauchy_schwarz_check(&s, &p, &g);
        let m = conserved_quantities(&s, &p, &g).momentum_norm();
        let rel = margin / (1.0 + m);
        worst = worst.min(rel);
        ok &= margin >= -1e-12 * (1.0 + m);
    }
    rep.add(4, ok, format!("1000 random states, worst margin/(1+|M|) = {worst:.3e}"));
    Ok(())
}

fn transport_orders(rep: &mut Report) -> dnslab::Result<()> {
    let p = Params::new(1.0, 1.5, 0.5, 1.0, 0.0);
    let cfg = OracleStudyConfig {
        methods: vec![Method::Upwind1, Method::Upwind2],
        levels: vec![32, 64, 128, 256],
        ..Default::default()
    };
    let table = transport_order_study(&cfg, &TransportScheme::default(), &p)?;
    let mut ok = true;
    let mut worst = [f64::INFINITY; 2];
    for f in &table.fits {
        let (slot, need) = if f.method == Method::Upwind1 { (0, 0.9) } else { (1, 1.8) };
        worst[slot] = worst[slot].min(f.order);
        ok &= f.order >= need;
    }
    let varphi = table.fit(Method::Upwind2, OracleCase::Linear, OracleQuantity::Varphi).map_or(f64::NAN, |f| f.order);
    rep.add(
        5,
        ok && table.fits.len() == 16,
        format!(
            "min fitted order Upwind1 {:.3} (>=0.9), Upwind2 {:.3} (>=1.8); varphi v=x Upwind2 {varphi:.3}",
            worst[0], worst[1]
        ),
    );
    Ok(())
}

fn relation_preservation(rep: &mut Report) -> dnslab::Result<()> {
    let p = Params::new(1.0, 2.0, 0.5, 1.0, 0.0).with_dim(2);
    let mut dxs = Vec::new();
    let mut res = Vec::new();
    let mut curls = Vec::new();
    for n in [16, 32, 64] {
        let g = Grid::uniform(2, n, 0.0, 1.0, Boundary::Periodic)?;
        let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.2 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let u = VectorField::from_fn(&g, |x| [0.3 * (2.0 * PI * x[1]).sin(), 0.2 * (2.0 * PI * x[0]).cos(), 0.0]);
        let mut cfg = PicardConfig::new(0.2 / n as f64);
        cfg.monitors = false;
        let run = solve_nonlinear(&PrimitiveState::new(rho, u, 0.0), &p, &g, 0.05, &cfg)?;
        rep.krylov(run.krylov_residual);
        let r = relation_residuals(run.final_state(), &p, &g)?;
        dxs.push(1.0 / n as f64);
        res.push(r.psi_grad_h);
        curls.push(r.curl_psi);
    }
    let (slope, _) = fit_log_slope(&dxs, &res);
    let (curl_slope, _) = fit_log_slope(&dxs, &curls);
    rep.add(
        6,
        slope >= 1.5 && curl_slope >= 1.5,
        format!(
            "|psi - c grad h| {:.2e} {:.2e} {:.2e} slope {slope:.2}; curl psi slope {curl_slope:.2}",
            res[0], res[1], res[2]
        ),
    );
    Ok(())
}

fn picard_contraction(rep: &mut Report) -> dnslab::Result<()> {
    let p = Params::new(1.0, 2.0, 0.5, 1.0, 0.0);
    let g = Grid::periodic_1d(128, 1.0)?;
    let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.05 * (2.0 * PI * x[0]).sin());
    let u = VectorField::from_fn(&g, |x| [0.05 * (2.0 * PI * x[0]).cos(), 0.0, 0.0]);
    let start = to_reform(&PrimitiveState::new(rho, u, 0.0), &p, &g)?;
    let mut cfg = PicardConfig::new(1e-3);
    cfg.tol = Some(1e-28);
    cfg.k_max = 6;
    let mut log = Vec::new();
    let out = solve_slab(&start, 10, cfg.dt, &p, &g, &cfg, 0, &mut log)?;
    rep.krylov(out.krylov_residual);
    let ratios: Vec<f64> = out.gammas.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = ratios.len() >= 3 && ratios.iter().take(3).all(|&r| r <= 0.5);
    let shown: Vec<String> = ratios.iter().take(4).map(|r| format!("{r:.2e}")).collect();
    rep.add(7, ok, format!("Gamma ratios {}", shown.join(", ")));
    Ok(())
}

fn continuation_study(rep: &mut Report) -> dnslab::Result<()> {
    let p = Params::new(1.0, 1.5, 0.9, 1.0, 0.0);
    let g = Grid::far_field(1, 256, 4.0)?;
    let init = dnslab::admissibility::make_power_law_init(
        2.0,
        Some(&dnslab::admissibility::Bump { amplitude: 0.1, radius: 1.0 }),
        &g,
        &p,
    )?;
    let plan = ContinuationPlan::new(
        ContinuationPlan::geometric(1e-2, 1e-6, 5),
        ContinuationPlan::geometric(1e-1, 1e-4, 4),
    );
    let mut cfg = PicardConfig::new(1e-3);
    cfg.momentum = cfg.momentum.with_form(MomentumForm::HForm);
    let table = continuation(&init, &p, &g, &plan, 0.02, &cfg)?;
    let floor = table.interior_floor().unwrap_or(f64::NAN);
    let eta_rows = &table.rows[table.eps_runs - 1..];
    let eta_floor = eta_rows.iter().filter_map(|r| r.interior_min_rho).fold(f64::INFINITY, f64::min);
    let ok = table.all_ok() && table.eps_monotone() && table.eta_monotone() && eta_floor >= 0.25;
    let d: Vec<String> = table.rows.iter().skip(1).map(|r| format!("{:.1e}", r.dist_u.unwrap_or(f64::NAN))).collect();
    rep.add(
        8,
        ok,
        format!("u distances {}; interior min rho {floor:.3} (>= 0.25)", d.join(" ")),
    );
    Ok(())
}

fn admissibility_window(rep: &mut Report) -> dnslab::Result<()> {
    let p = Params::new(1.0, 1.5, 0.9, 1.0, 0.0).with_dim(3);
    let cfg = ClassifyConfig::default();
    let mut slowest = 0.0f64;
    let mut check = |a: f64, set: NormSet| -> dnslab::Result<_> {
        let clock = Instant::now();
        let r = check_admissible(&RadialProfile::new(a)?, &p, set, &cfg)?;
        slowest = slowest.max(clock.elapsed().as_secs_f64());
        Ok(r)
    };
    let mid = check(2.0, NormSet::Base)?;
    let low = check(1.0, NormSet::Base)?;
    let high = check(3.0, NormSet::Base)?;
    let high_q = check(3.0, NormSet::Lq { q: 12.0 })?;
    let diverges = |r: &dnslab::admissibility::AdmissibilityReport| {
        r.diverging().filter(|n| n.slope.is_some_and(|s| s >= -0.1)).map(|n| n.name.clone()).next()
    };
    let lo_name = diverges(&low);
    let hi_name = diverges(&high);
    let ok = mid.verdict == Verdict::Finite
        && lo_name.is_some()
        && hi_name.is_some()
        && high_q.verdict == Verdict::Finite
        && slowest <= 10.0;
    rep.add(
        9,
        ok,
        format!(
            "a=2 {}, a=1 diverging [{}], a=3 diverging [{}], a=3 q=12 {}, slowest {slowest:.2}s",
            mid.verdict,
            lo_name.unwrap_or_default(),
            hi_name.unwrap_or_default(),
            high_q.verdict
        ),
    );
    Ok(())
}

fn momentum_verification(rep: &mut Report) -> dnslab::Result<()> {
    // a = 1 with gamma = 1.5; the 1-D Lame operator is -2 d_xx for alpha = 1, beta = 0.
    let gamma = 1.5;
    let p = Params::new((gamma - 1.0) / gamma, gamma, 0.5, 1.0, 0.0);
    let a = p.derived()?.a;
    let n = 256;
    let g = Grid::periodic_1d(n, 1.0)?;
    let zero = VectorField::zeros(1, n);
    let one = ScalarField::constant(n, 1.0);
    let cfg = MomentumStepConfig::default();
    let (t, dt): (f64, f64) = (0.01, 1e-5);
    let mut u = VectorField(vec![ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin())]);
    for _ in 0..(t / dt).round() as usize {
        let s = advance_momentum_varphi(&u, &zero, &one, &one, &zero, &p, dt, &g, &cfg)?;
        rep.krylov(s.report.residual);
        u = s.u;
    }
    let decay = (-2.0 * a * (2.0 * PI).powi(2) * t).exp();
    let exact = ScalarField::from_fn(&g, |x| decay * (2.0 * PI * x[0]).sin());
    let l2 = |f: &ScalarField| (f.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let heat_err = l2(&u[0].zip_map(&exact, |x, y| x - y)) / l2(&exact);

    // Vacuum profile rho = 1/(1+x^4) on [-4, 4].
    let q = Params::new(1.0, 1.5, 0.9, 1.0, 0.0);
    let fg = Grid::far_field(1, 256, 4.0)?;
    let rho = ScalarField::from_fn(&fg, |x| 1.0 / (1.0 + x[0].powi(4)));
    let u0 = VectorField::from_fn(&fg, |x| [0.1 * (-x[0] * x[0]).exp() * x[0], 0.0, 0.0]);
    let r = to_reform(&PrimitiveState::new(rho, u0, 0.0), &q, &fg)?;
    let cfg_h = cfg.with_form(MomentumForm::HForm);
    let step = 1e-3;
    let h = advance_momentum_h(&r.u, &r.u, &r.phi, &r.h, &r.psi, &q, 1e-8, step, &fg, &cfg_h)?;
    let v = advance_momentum_varphi(&r.u, &r.u, &r.phi, &r.varphi, &r.f, &q, step, &fg, &cfg)?;
    rep.krylov(h.report.residual.max(v.report.residual));
    let diff = (h.u[0].iter().zip(v.u[0].iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * fg.cell_volume()).sqrt();
    rep.add(
        10,
        heat_err <= 0.01 && diff <= 1e-6,
        format!("heat decay relative error {heat_err:.2e}; h-form vs varphi-form L2 {diff:.2e}"),
    );
    Ok(())
}

fn lame_order(rep: &mut Report) -> dnslab::Result<()> {
    let lame = Lame::new(1.0, 0.5);
    let kcfg = KrylovConfig { rtol: 1e-12, ..Default::default() };
    let mut dxs = Vec::new();
    let mut errs = Vec::new();
    for n in [16, 32, 64, 128] {
        let g = Grid::uniform(2, n, 0.0, 1.0, Boundary::Periodic)?;
        let exact = VectorField::from_fn(&g, |x| {
            let (s, c) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).cos());
            [s * c, (2.0 * PI * x[0]).cos() * (4.0 * PI * x[1]).sin(), 0.0]
        });
        // Continuous L u for the manufactured field.
        let k2 = 4.0 * PI * PI;
        let z = VectorField::from_fn(&g, |x| {
            let (sx, cx) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[0]).cos());
            let (sy, cy) = ((2.0 * PI * x[1]).sin(), (2.0 * PI * x[1]).cos());
            let (s2y, c2y) = ((4.0 * PI * x[1]).sin(), (4.0 * PI * x[1]).cos());
            // u1 = sx cy, u2 = cx s2y; div u = 2pi cx cy + 4pi cx c2y
            let lap1 = -2.0 * k2 * sx * cy;
            let lap2 = -5.0 * k2 * cx * s2y;
            let gd1 = -k2 * sx * cy - 2.0 * k2 * sx * c2y;
            let gd2 = -k2 * cx * sy - 4.0 * k2 * cx * s2y;
            [-lame.alpha * lap1 - (lame.alpha + lame.beta) * gd1, -lame.alpha * lap2 - (lame.alpha + lame.beta) * gd2, 0.0]
        });
        let s = lame_solve(&z, lame, &g, &kcfg)?;
        rep.krylov(s.report.residual);
        let err: f64 = s
            .u
            .iter()
            .zip(exact.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
            .sum::<f64>()
            * g.cell_volume();
        dxs.push(1.0 / n as f64);
        errs.push(err.sqrt());
    }
    let (order, _) = fit_log_slope(&dxs, &errs);
    let kr = rep.krylov_worst;
    rep.add(
        11,
        (order - 2.0).abs() <= 0.2 && kr <= 1e-10,
        format!("Lame manufactured order {order:.3}; worst Krylov relative residual over all runs {kr:.2e}"),
    );
    Ok(())
}

fn main() -> ExitCode {
    let mut rep = Report { lines: Vec::new(), krylov_worst: 0.0 };
    let clock = Instant::now();
    if let Err(e) = conservation_suite(&mut rep) {
        for id in 1..=3 {
            rep.add(id, false, format!("error: {e}"));
        }
    }
    type Check = fn(&mut Report) -> dnslab::Result<()>;
    let checks: [(usize, Check); 8] = [
        (4, cauchy_schwarz),
        (5, transport_orders),
        (6, relation_preservation),
        (7, picard_contraction),
        (8, continuation_study),
        (9, admissibility_window),
        (10, momentum_verification),
        (11, lame_order),
    ];
    for (id, f) in checks {
        if let Err(e) = f(&mut rep) {
            rep.fail(id, e);
        }
    }
    let failed: Vec<usize> = rep.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        rep.lines.len() - failed.len(),
        rep.lines.len(),
        clock.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
