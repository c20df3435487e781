use std::f64::consts::PI;

use rand::Rng;

use super::experiments::{
    column, decay, decomposition as run_decomposition, fringe_series, measured, one_over_e_time, per_repetition,
    repeat, run_script, xy8_block, View,
};
use super::{Check, Context};
use crate::analysis::{
    conditional_purity, excise, excised_fidelity, excised_purity, flagged_fraction, fraction, occupied,
    purity_by_enumeration, FlagSelector, Proportion,
};
use crate::dynamics::{
    calibrate_dephasing_with, master_rates_solve, xy8_options, Filter, Occupancy, T2_ECHO, T2_STAR, XY8_SPACING,
};
use crate::engine::{parse_script, run_trials, run_trials_serial, write_csv, TrialRecord};
use crate::error::{Error, Result};
use crate::instruments::{audit_transitions, eps01, eps10, fluorescence_image, pump_duration_for, pump_fidelity};
use crate::rng::{derive_seed, stream};
use crate::state::{Bloch, SiteState, StateBin};

fn value(p: &Proportion) -> f64 {
    p.value().unwrap_or(f64::NAN)
}

fn us(seconds: f64) -> String {
    format!("{:.3}us", seconds * 1e6)
}

pub fn imaging_lifetime(ctx: &Context) -> Result<Vec<Check>> {
    let start = std::time::Instant::now();
    let image = ctx.params.images.error.duration;
    let mut points = Vec::new();
    let mut trajectories = 0;
    for (i, n) in [0u32, 70, 140, 210, 280].into_iter().enumerate() {
        let text = format!("load 10 1 init=M_MINUS\n{}measure M_MINUS", repeat(n, "image error"));
        let records = run_script(ctx, &text, 2000, 100 + i as u64)?;
        trajectories += records.len();
        points.push((n as f64 * image, value(&measured(&records))));
    }
    let (rate, sigma) = decay(&points)?;
    let lifetime = 1.0 / rate;
    Ok(vec![
        Check::within("1/e lifetime (s)", "0.790(60)", lifetime, Some(sigma / (rate * rate)), 0.790, 0.079),
        Check::at_least("site trajectories", "1e5", trajectories as f64, None, 1e5),
        Check::at_most("wall time (s)", "< 10", start.elapsed().as_secs_f64(), None, 10.0),
    ])
}

pub fn roc(ctx: &Context) -> Result<Vec<Check>> {
    let image = &ctx.params.images.error;
    let thresholds: Vec<f64> = (0..20).map(|i| 1.0 + 0.5 * i as f64).collect();
    let e01: Vec<f64> = thresholds.iter().map(|&t| eps01(t, image)).collect();
    let e10: Vec<f64> = thresholds.iter().map(|&t| eps10(t, image)).collect();
    let monotone = e01.windows(2).all(|w| w[1] <= w[0] + 1e-15) && e10.windows(2).all(|w| w[1] >= w[0] - 1e-15);

    // Sampled readout of bright and dark sites against the modelled tails.
    let n = 50_000u64;
    let theta = image.threshold;
    let rate = |bin: StateBin, salt: u64, want_bright: bool| {
        let hits = (0..n)
            .filter(|&k| {
                let mut rng = stream(derive_seed(ctx.seed, 200 + salt), k, 0, 0);
                let site = SiteState::new(bin, ctx.params.trap.depth_ed);
                let (count, _) = fluorescence_image(&site, image, &ctx.params, &mut rng);
                (count > theta) == want_bright
            })
            .count();
        Proportion::new(hits as u64, n)
    };
    let mc01 = rate(StateBin::MMinus, 0, true);
    let mc10 = rate(StateBin::DPrime, 1, false);
    let (a01, a10) = (eps01(theta, image), eps10(theta, image));
    Ok(vec![
        Check::within("eps10 at threshold 4.8", "0.033", a10, None, 0.033, 0.005),
        Check::holds("eps01 and eps10 monotone over 20 thresholds", "monotone", monotone),
        Check::agrees("sampled eps10", "model", value(&mc10), mc10.sigma().max(1.0 / n as f64), a10, 3.0),
        Check::agrees("sampled eps01", "model", value(&mc01), mc01.sigma().max(1.0 / n as f64), a01, 3.0),
    ])
}

fn preparation_script(pump: f64) -> String {
    format!(
        "load 10 0.6 init=detect\nimage nondestructive\npump {}\nmicrowave 0.99 DPRIME M_MINUS\nimage error\nmeasure M_MINUS",
        us(pump)
    )
}

pub fn preparation(ctx: &Context) -> Result<Vec<Check>> {
    let pump = &ctx.params.pump;
    // 20 τ saturates the pumping curve at f_inf = 0.96.
    let long = 20.0 * pump.tau_op;
    let short = pump_duration_for(0.46, pump).ok_or_else(|| Error::Argument("f_OP = 0.46 unreachable".into()))?;
    let sel = FlagSelector::Image(0);
    let target = StateBin::MMinus;

    let records = run_script(ctx, &preparation_script(long), 20_000, 300)?;
    let p_e = excised_purity(&records, sel, target);
    let f_e = excised_fidelity(&records, sel, target);
    let flagged = flagged_fraction(&records, sel);
    let low = run_script(ctx, &preparation_script(short), 20_000, 301)?;
    let p_e_low = excised_purity(&low, sel, target);

    let mut checks = vec![
        Check::within("p_E at f_OP = 0.96", "0.995(1)", value(&p_e), Some(p_e.sigma()), 0.995, 0.003),
        Check::at_least("p_E at f_OP = 0.46", "≈0.96", value(&p_e_low), Some(p_e_low.sigma()), 0.95),
        Check::within("f_E", "0.952(3)", value(&f_e), Some(f_e.sigma()), 0.952, 0.010),
        Check::within("retained-fraction reduction", "0.072(2)", value(&flagged), Some(flagged.sigma()), 0.072, 0.010),
    ];

    // Closed form against the same pipeline with no loss after classification.
    let mut lossless = ctx.clone();
    lossless.params.imaging.loss_target_per_image = 0.0;
    let image = &ctx.params.images.error;
    let (e01, e10) = (eps01(image.threshold, image), eps10(image.threshold, image));
    for (label, duration, stream_id) in
        [("closed-form p_E at 0.96", long, 302), ("closed-form p_E at 0.46", short, 303)]
    {
        let r = run_script(&lossless, &preparation_script(duration), 20_000, stream_id)?;
        let mc = excised_purity(&r, sel, target);
        let s = pump_fidelity(duration, pump) * 0.99;
        let expected = conditional_purity(s, e01, e10)?;
        checks.push(Check::agrees(label, "conditional_purity", value(&mc), mc.sigma(), expected, 3.0));
    }
    Ok(checks)
}

fn ramsey(body: &str, phase: f64, tail: &str) -> String {
    format!("load 10 1 init=Q_DOWN\nraman xa-optimal pi/2 0\n{body}raman xa-optimal pi/2 {phase}\n{tail}measure Q_DOWN")
}

/// Fringe amplitude against free-evolution time for a body built from `t`.
fn amplitude_curve(
    ctx: &Context,
    ts: &[f64],
    body: impl Fn(f64) -> String,
    n_trials: u64,
    stream_id: u64,
) -> Result<Vec<(f64, f64)>> {
    let script = |t: f64, phase: f64| ramsey(&body(t), phase, "");
    let series = fringe_series(ctx, ts, script, n_trials, stream_id, &[View::All])?;
    Ok(column(&series[0], "amplitude"))
}

fn xy8_scan(
    ctx: &Context,
    scheme: &str,
    hold_opts: &str,
    tail: &str,
    n_trials: u64,
    stream_id: u64,
    views: &[View],
) -> Result<Vec<Vec<(f64, crate::analysis::FitResult)>>> {
    let block = xy8_block(scheme, XY8_SPACING, hold_opts);
    let ks: Vec<f64> = (0..=4).map(f64::from).collect();
    let script = |k: f64, phase: f64| ramsey(&repeat(k as u32, &block), phase, tail);
    let series = fringe_series(ctx, &ks, script, n_trials, stream_id, views)?;
    let per_block = 8.0 * XY8_SPACING;
    Ok(series.into_iter().map(|s| s.into_iter().map(|(k, f)| (k * per_block, f)).collect()).collect())
}

pub fn coherence_calibration(ctx: &Context) -> Result<Vec<Check>> {
    let fit = calibrate_dephasing_with(T2_STAR, T2_ECHO, &xy8_options(&ctx.params))?;
    let mut cal = ctx.clone();
    cal.params.dephasing.sigma_quasistatic = fit.sigma_quasistatic;
    cal.params.dephasing.sigma_ou = fit.sigma_ou;
    cal.params.dephasing.tau_ou = fit.tau_ou;

    let ramsey_ts = [0.0, 10e-3, 15e-3, 18e-3, 20e-3, 22e-3, 26e-3];
    let ramsey = amplitude_curve(&cal, &ramsey_ts, |t| format!("hold {}\n", us(t)), 1000, 400)?;
    let t2_star = one_over_e_time(&ramsey).unwrap_or(f64::NAN);

    let echo_ts = [0.0, 150e-3, 250e-3, 275e-3, 300e-3, 325e-3, 375e-3];
    let echo_body = |t: f64| format!("hold {h}\nraman xa-optimal pi 0\nhold {h}\n", h = us(t / 2.0));
    let echo = amplitude_curve(&cal, &echo_ts, echo_body, 1000, 401)?;
    let t2_echo = one_over_e_time(&echo).unwrap_or(f64::NAN);

    let time = |series: &[(f64, crate::analysis::FitResult)]| -> Result<(f64, f64)> {
        let (rate, sigma) = decay(&column(series, "amplitude"))?;
        Ok((1.0 / rate, sigma / (rate * rate)))
    };
    let (xb, xb_sigma) = time(&xy8_scan(&cal, "xb", "", "", 300, 402, &[View::All])?[0])?;
    let (xa, xa_sigma) = time(&xy8_scan(&cal, "xa-current", "", "", 300, 403, &[View::All])?[0])?;

    Ok(vec![
        Check::within("Ramsey T2* (s)", "0.0195", t2_star, None, T2_STAR, 0.05 * T2_STAR),
        Check::within("echo T2 (s)", "0.288", t2_echo, None, T2_ECHO, 0.05 * T2_ECHO),
        Check::within("XY8 1/e time, X-B (s)", "0.630(50)", xb, Some(xb_sigma), 0.630, 0.15 * 0.630),
        Check::within("XY8 1/e time, X-A (s)", "1.100(70)", xa, Some(xa_sigma), 1.100, 0.15 * 1.100),
    ])
}

struct CompositeErrors {
    eps_p: (f64, f64),
    eps_c: (f64, f64),
}

fn composite_errors(ctx: &Context, scheme: &str, mode: &str, stream_id: u64) -> Result<CompositeErrors> {
    let ns: Vec<f64> = (0..=6).map(|i| 4.0 * i as f64).collect();
    let body_of = |n: f64| repeat(n as u32, &format!("composite_detect {scheme} mode={mode}"));
    let script = |n: f64, phase: f64| ramsey(&body_of(n), phase, "");
    let series = fringe_series(ctx, &ns, script, 400, stream_id, &[View::All])?;
    Ok(CompositeErrors {
        eps_p: per_repetition(&column(&series[0], "offset"))?,
        eps_c: per_repetition(&column(&series[0], "amplitude"))?,
    })
}

pub fn composite(ctx: &Context) -> Result<Vec<Check>> {
    let xb = composite_errors(ctx, "xb", "full", 500)?;
    let xb_pi = composite_errors(ctx, "xb", "pi-only", 501)?;
    let xa = composite_errors(ctx, "xa-current", "no-image", 502)?;
    let d = run_decomposition(ctx, 500, 503)?;

    let excess = xb.eps_p.0 - xb_pi.eps_p.0;
    let budget = d.ramp.value + d.light.value;
    let sigma = [xb.eps_p.1, xb_pi.eps_p.1, d.ramp.sigma, d.light.sigma].iter().map(|s| s * s).sum::<f64>().sqrt();
    Ok(vec![
        Check::within("X-B eps_p", "3.3e-2", xb.eps_p.0, Some(xb.eps_p.1), 3.3e-2, 0.4e-2),
        Check::within("X-B eps_c", "4.6e-2", xb.eps_c.0, Some(xb.eps_c.1), 4.6e-2, 0.6e-2),
        Check::within("X-A eps_p without imaging", "5.2e-3", xa.eps_p.0, Some(xa.eps_p.1), 5.2e-3, 1e-3),
        Check::within("X-A eps_c without imaging", "1.1e-2", xa.eps_c.0, Some(xa.eps_c.1), 1.1e-2, 0.2e-2),
        Check::agrees("composite minus pi-only eps_p", "ramp+light", excess, sigma, budget, 2.0),
    ])
}

pub fn decomposition(ctx: &Context) -> Result<Vec<Check>> {
    let d = run_decomposition(ctx, 500, 600)?;
    Ok(vec![
        Check::within("detection light per image", "3.0e-3", d.light.value, Some(d.light.sigma), 3.0e-3, 0.4e-3),
        Check::within("ramp pair per image", "2.6e-3", d.ramp.value, Some(d.ramp.sigma), 2.6e-3, 0.4e-3),
        Check::within("background per image", "1.2e-3", d.background.value, Some(d.background.sigma), 1.2e-3, 0.4e-3),
        Check::holds(&format!("additivity (z = {:.2})", d.additivity_z), "z < 2", d.additive()),
    ])
}

fn is_qubit(r: &TrialRecord) -> bool {
    r.final_bin.is_qubit_state()
}

pub fn blackbody(ctx: &Context) -> Result<Vec<Check>> {
    let ts = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let n = 10_000;
    let (mut plain, mut excised, mut five) = (Vec::new(), Vec::new(), Vec::new());
    let (mut detected, mut errors) = (0u64, 0u64);
    for (i, &t) in ts.iter().enumerate() {
        let text = format!("load 10 1 init=Q_DOWN\nhold {t}s repump=50ms\nconvert\nimage error\nmeasure Q_DOWN");
        let records = run_script(ctx, &text, n, 700 + i as u64)?;
        plain.push((t, value(&fraction(occupied(&records), is_qubit))));
        excised.push((t, value(&fraction(excise(&records, FlagSelector::Any).kept, is_qubit))));
        for r in records.iter().filter(|r| r.trail.contains(&StateBin::V1N1) && !is_qubit(r)) {
            errors += 1;
            detected += r.any_flag() as u64;
        }

        let segment = format!("hold {}s repump=50ms\nconvert\nimage error\n", t / 5.0);
        let body = if t > 0.0 { segment.repeat(5) } else { "image error\n".into() };
        let records = run_script(ctx, &format!("load 10 1 init=Q_DOWN\n{body}measure Q_DOWN"), n, 710 + i as u64)?;
        five.push((t, value(&fraction(excise(&records, FlagSelector::Any).kept, is_qubit))));
    }
    let (g_p, s_p) = decay(&plain)?;
    let (g_e, s_e) = decay(&excised)?;
    let (g_5, s_5) = decay(&five)?;
    let d = Proportion::new(detected, errors);
    Ok(vec![
        Check::within("gamma_p without excision (1/s)", "0.30(1)", g_p, Some(s_p), 0.30, 0.02),
        Check::within("gamma_p,E (1/s)", "0.13(1)", g_e, Some(s_e), 0.134, 0.010),
        Check::at_most("gamma_p,E5 (1/s)", "gamma_p,E - 0.014(15)", g_5, Some(s_5), g_e + 0.01),
        Check::within("detected fraction of blackbody errors", "≈0.80", value(&d), Some(d.sigma()), 0.80, 0.05),
    ])
}

pub fn coherence_excision(ctx: &Context) -> Result<Vec<Check>> {
    let series = xy8_scan(ctx, "xb", " repump=50ms", "convert\nimage error\n", 1500, 800, &[View::All, View::Excised])?;
    let (amp, amp_s) = decay(&column(&series[0], "amplitude"))?;
    let (amp_e, amp_e_s) = decay(&column(&series[1], "amplitude"))?;
    let (pop, pop_s) = decay(&column(&series[0], "offset"))?;
    let (pop_e, pop_e_s) = decay(&column(&series[1], "offset"))?;
    let gain = amp - amp_e;
    let pop_gain = pop - pop_e;
    let gain_sigma = amp_s.hypot(amp_e_s);
    let diff_sigma = gain_sigma.hypot(pop_s.hypot(pop_e_s));
    Ok(vec![
        Check::within("unexcised decoherence rate (1/s)", "1.64(4)", amp, Some(amp_s), 1.64, 0.15),
        Check::within("excision improvement (1/s)", "0.17(6)", gain, Some(gain_sigma), 0.16, 0.05),
        Check::agrees("coherence vs population improvement", "0.162(15)", gain, diff_sigma, pop_gain, 2.0),
    ])
}

pub fn properties(ctx: &Context) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // Sampled hold trajectories against the master equation, per bin.
    let mut worst = 0.0f64;
    for (i, t) in [0.1, 1.0, 5.0].into_iter().enumerate() {
        let records =
            run_script(ctx, &format!("load 10 1 init=Q_DOWN\nhold {t}s\nmeasure Q_DOWN"), 5000, 900 + i as u64)?;
        let oracle = master_rates_solve(&ctx.params, &Occupancy::pure(StateBin::QDown), t)?;
        let n = records.len() as f64;
        for bin in StateBin::ALL {
            let p = oracle.get(bin);
            let observed = records.iter().filter(|r| r.final_bin == bin).count() as f64 / n;
            let sigma = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
            worst = worst.max((observed - p).abs() / sigma);
        }
    }
    checks.push(Check::at_most("sampler vs master equation (max z)", "3σ per bin", worst, None, 3.0));

    // Byte-identical output across reruns and the serial path.
    let schedule = parse_script(&preparation_script(20.0 * ctx.params.pump.tau_op))?;
    let seed = derive_seed(ctx.seed, 910);
    let csv = |records: &[TrialRecord]| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(records, &mut buf)?;
        Ok(buf)
    };
    let a = csv(&run_trials(&schedule, 500, seed, &ctx.params)?)?;
    let b = csv(&run_trials(&schedule, 500, seed, &ctx.params)?)?;
    let c = csv(&run_trials_serial(&schedule, 500, seed, &ctx.params)?)?;
    checks.push(Check::holds("rerun and serial CSV bytes identical", "identical", a == b && a == c));

    let violations = audit_transitions(&ctx.params, 20_000, derive_seed(ctx.seed, 920))?;
    checks.push(Check::holds(
        &format!("transition audit ({} parity violations)", violations.len()),
        "none",
        violations.is_empty(),
    ));

    let mut rng = stream(derive_seed(ctx.seed, 930), 0, 0, 0);
    let mut rotation_err = 0.0f64;
    let mut echo_err = 0.0f64;
    for _ in 0..1000 {
        let v = Bloch::new([rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5]);
        let phi = rng.random::<f64>() * 2.0 * PI;
        let (a1, a2) = (rng.random::<f64>() * 4.0 * PI, rng.random::<f64>() * 4.0 * PI);
        let twice = v.rotate_equatorial(phi, a1).rotate_equatorial(phi, a2);
        let once = v.rotate_equatorial(phi, a1 + a2);
        let inverse = v.rotate_equatorial(phi, a1).rotate_equatorial(phi, -a1);
        for (x, y) in twice.as_array().iter().zip(once.as_array()).chain(inverse.as_array().iter().zip(v.as_array())) {
            rotation_err = rotation_err.max((x - y).abs());
        }
        // Static detuning accumulated before and after a π pulse cancels.
        let phase = (rng.random::<f64>() - 0.5) * 200.0;
        let start = Bloch::new([0.0, 0.0, 1.0]).rotate_equatorial(0.0, PI / 2.0);
        let end = start.precess(phase).rotate_equatorial(0.0, PI).precess(phase).rotate_equatorial(0.0, PI / 2.0);
        echo_err = echo_err.max((end.p_down() - 1.0).abs());
    }
    let static_echo = Filter::echo(0.288).coherence(ctx.params.dephasing.sigma_quasistatic, 0.0, 1.0);
    checks.push(Check::at_most("rotation composition error", "exact", rotation_err, None, 1e-12));
    checks.push(Check::at_most("echo refocusing error", "exact", echo_err.max((static_echo - 1.0).abs()), None, 1e-12));

    let mut purity_err = 0.0f64;
    for i in 0..=10 {
        for j in 0..=10 {
            for k in 0..=10 {
                let (s, e01, e10) = (i as f64 / 10.0, j as f64 / 10.0 * 0.5, k as f64 / 10.0 * 0.5);
                if let (Ok(x), Ok(y)) = (conditional_purity(s, e01, e10), purity_by_enumeration(s, e01, e10)) {
                    purity_err = purity_err.max((x - y).abs());
                }
            }
        }
    }
    checks.push(Check::at_most("conditional_purity vs enumeration", "exact", purity_err, None, 1e-12));
    Ok(checks)
}
