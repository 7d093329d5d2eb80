use std::collections::BTreeSet;
use std::f64::consts::E;

use num_complex::Complex64;

use crate::dsl::{compose_power, CompiledMap, Image};
use crate::itinerary::Itinerary;
use crate::modulus::{
    estimate_growth_b, estimate_m, estimate_r_f_on, iterated_exp, mm_sequence, ModulusError, ModulusParams,
};
use crate::sphere::{ChartIndex, PunctureSet};

use super::{Check, VerificationReport, VerifyError};

/// Map of the iterate counterexample, on `S = {inf, 0}`.
pub const REMARK_MAP: &str = "exp(exp(1/z) + z)";
/// `f(-4)` to 50 digits.
pub const REMARK_F_MINUS_4: &str = "0.039907172197032625603458620377290232215304910739474";
/// `log log |f^2(-4)|` to 30 digits.
pub const REMARK_LOGLOG_MINUS_4: &str = "25.0581523306824979153295358283";
/// `log log |f^2(-6)|` to 30 digits.
pub const REMARK_LOGLOG_MINUS_6: &str = "173.039220190868492894005936578";

#[derive(Debug, Clone, PartialEq)]
pub struct MmseqConfig {
    pub grid: Vec<f64>,
    /// Chart pairs to test; `None` means all pairs.
    pub pairs: Option<Vec<(ChartIndex, ChartIndex)>>,
    pub depth: usize,
    /// `R' = ratio * R` for the dominance check.
    pub ratio: f64,
    pub params: ModulusParams,
}

impl Default for MmseqConfig {
    fn default() -> Self {
        Self {
            grid: (2..=50).map(f64::from).collect(),
            pairs: None,
            depth: 4,
            ratio: 1.05,
            params: ModulusParams::default(),
        }
    }
}

fn all_pairs(s: &PunctureSet) -> Vec<(ChartIndex, ChartIndex)> {
    s.charts().flat_map(|j| s.charts().map(move |k| (j, k))).collect()
}

/// Constant itineraries `(j)*` with `(j, j)` tested, and 2-cycles `(jk)*`
/// with both `(j, k)` and `(k, j)` tested.
fn itineraries_for(pairs: &[(ChartIndex, ChartIndex)]) -> Vec<Itinerary> {
    let set: BTreeSet<(usize, usize)> = pairs.iter().map(|(j, k)| (j.get(), k.get())).collect();
    let mut out = Vec::new();
    for &(j, k) in &set {
        if j == k {
            out.push(Itinerary::constant(ChartIndex(j)));
        } else if j < k && set.contains(&(k, j)) {
            out.push(Itinerary::new(Vec::new(), vec![ChartIndex(j), ChartIndex(k)]).expect("non-empty cycle"));
        }
    }
    out
}

/// Checks, on a radius grid: (a) `log M_{j,k}(r) > 2 log r` for grid
/// radii at or above the `R(f)` surrogate, (b) strict increase of the
/// depth-`depth` sequences from the first grid radius above it, and (c)
/// `R'_n > R_n` for `R' = ratio * R`.
pub fn verify_mmseq_lemma(map: &CompiledMap, cfg: &MmseqConfig) -> Result<VerificationReport, VerifyError> {
    let mut rep = VerificationReport::for_check(Check::MmseqLemma, 0.0);
    let s = map.punctures();
    let pairs = cfg.pairs.clone().unwrap_or_else(|| all_pairs(s));
    if pairs.is_empty() || cfg.grid.is_empty() {
        return Err(VerifyError::Invalid("need at least one chart pair and one radius".into()));
    }
    for &(j, k) in &pairs {
        s.chart(j.get()).and(s.chart(k.get())).map_err(ModulusError::from)?;
    }

    // (a) margins on the whole grid
    let mut margins = Vec::with_capacity(cfg.grid.len());
    for &r in &cfg.grid {
        let mut m = f64::INFINITY;
        for &(j, k) in &pairs {
            let v = match estimate_m(map, j, k, r, cfg.params) {
                Ok(est) => est.value_log - 2.0 * r.ln(),
                Err(ModulusError::AllSamplesUnderflow { .. } | ModulusError::NoResolvedSamples { .. }) => {
                    rep.exceptions.push(format!("(a) r={r} pair=({},{}) unresolved", j.get(), k.get()));
                    f64::NEG_INFINITY
                }
                Err(e) => return Err(e.into()),
            };
            m = m.min(v);
        }
        margins.push(m);
    }
    let full = margins.iter().copied().fold(f64::INFINITY, f64::min);
    rep.measure("a.margin_full_grid", full);

    let r_f = match estimate_r_f_on(map, &cfg.grid, &pairs, cfg.params) {
        Ok(r) => Some(r),
        Err(ModulusError::RfNotFound) => None,
        Err(e) => return Err(e.into()),
    };
    let a_ok = match r_f {
        Some(r_f) => {
            rep.measure("r_f", r_f);
            let (mut best, mut at) = (f64::INFINITY, r_f);
            for (&r, &m) in cfg.grid.iter().zip(&margins) {
                if r >= r_f && m < best {
                    best = m;
                    at = r;
                }
            }
            rep.measure("a.margin", best);
            rep.measure("a.argmin_r", at);
            best > 0.0
        }
        None => {
            rep.exceptions.push("(a) no grid radius from which M > r^2 holds for every pair".into());
            false
        }
    };
    rep.measure("a.pass", f64::from(u8::from(a_ok)));

    // (b), (c)
    let start = match r_f {
        Some(r_f) => cfg.grid.iter().copied().find(|&r| r > r_f).unwrap_or(r_f * 1.5),
        None => cfg.grid[0],
    };
    rep.measure("b.start_r", start);
    let (mut b_ok, mut c_ok) = (true, true);
    let (mut min_step, mut min_gap) = (f64::INFINITY, f64::INFINITY);
    for e in itineraries_for(&pairs) {
        let word = e.take(cfg.depth + 1);
        let seq = mm_sequence(map, &word, start, cfg.depth, cfg.params)?;
        let dom = mm_sequence(map, &word, start * cfg.ratio, cfg.depth, cfg.params)?;
        for w in seq.values_log.windows(2) {
            min_step = min_step.min(w[1] - w[0]);
        }
        if let Some(n) = seq.first_non_increase() {
            b_ok = false;
            rep.exceptions.push(format!("(b) e={e} not increasing at n={n}"));
        }
        for (n, (a, b)) in seq.values_log.iter().zip(&dom.values_log).enumerate() {
            min_gap = min_gap.min(b - a);
            if !(b > a) {
                c_ok = false;
                rep.exceptions.push(format!("(c) e={e} R'_n <= R_n at n={n}"));
            }
        }
    }
    rep.measure("b.min_log_step", min_step);
    rep.measure("c.min_log_gap", min_gap);
    rep.fail_unless(a_ok && b_ok && c_ok);
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnConfig {
    pub itinerary: Itinerary,
    pub r: f64,
    pub n_max: usize,
    /// Radii for the growth constants `rho_0`, `alpha`, `B`.
    pub growth_radii: Vec<f64>,
    pub params: ModulusParams,
}

impl Default for EnConfig {
    fn default() -> Self {
        Self {
            itinerary: Itinerary::constant(ChartIndex(0)),
            r: 10.0,
            n_max: 2,
            growth_radii: vec![4.0, 8.0, 16.0, 32.0],
            params: ModulusParams::default(),
        }
    }
}

/// Checks `log(log R_n / log S_{n-1}) >= E_n` for `1 <= n <= n_max`, where
/// `(R_n)` starts at `R` along `e` and `(S_n)` starts at `R` along
/// `sigma(e)`. `R > max(rho_0, alpha, exp(2/B))` is a precondition; a
/// violation skips the check but the values are still reported.
pub fn verify_en_inequality(map: &CompiledMap, cfg: &EnConfig) -> Result<VerificationReport, VerifyError> {
    let mut rep = VerificationReport::for_check(Check::EnInequality, 0.0);
    if cfg.n_max == 0 {
        return Err(VerifyError::Invalid("n_max must be at least 1".into()));
    }
    let e = &cfg.itinerary;
    e.check_nu(map.punctures().nu())?;

    let pairs: BTreeSet<(usize, usize)> =
        (1..=cfg.n_max).map(|n| (e.symbol(n - 1).get(), e.symbol(n).get())).collect();
    let (mut b, mut alpha, mut rho0) = (f64::INFINITY, 0.0f64, 0.0f64);
    for &(j, k) in &pairs {
        let g = estimate_growth_b(map, ChartIndex(j), ChartIndex(k), &cfg.growth_radii, cfg.params)?;
        b = b.min(g.b_hat);
        alpha = alpha.max(g.alpha_hat);
        rho0 = rho0.max(g.rho0_hat);
    }
    let bound = rho0.max(alpha).max((2.0 / b).exp());
    rep.measure("b_hat", b);
    rep.measure("alpha_hat", alpha);
    rep.measure("rho0_hat", rho0);
    rep.measure("r_bound", bound);
    rep.measure("r", cfg.r);

    let seq = mm_sequence(map, &e.take(cfg.n_max + 1), cfg.r, cfg.n_max, cfg.params)?;
    let shifted = mm_sequence(map, &e.shift().take(cfg.n_max), cfg.r, cfg.n_max - 1, cfg.params)?;
    let mut truncated = None;
    let mut holds = true;
    for n in 1..=cfg.n_max {
        let (Some(ln), Some(ls)) = (seq.get(n), shifted.get(n - 1)) else {
            truncated = Some(n);
            break;
        };
        let v = (ln / ls).ln();
        let en = iterated_exp(n as u32).map_err(VerifyError::from);
        let en = match en {
            Ok(x) => x,
            Err(_) => {
                truncated = Some(n);
                break;
            }
        };
        rep.measure(&format!("value_{n}"), v);
        rep.measure(&format!("e_{n}"), en);
        if !(v >= en) {
            holds = false;
            rep.exceptions.push(format!("n={n}: {v} < {en}"));
        }
    }

    if !(cfg.r > bound) {
        rep.skip(format!("precondition violated: R = {} <= max(rho0, alpha, exp(2/B)) = {bound}", cfg.r));
    } else if let Some(n) = truncated {
        rep.skip(format!("sequence truncated before n = {n}"));
    } else {
        rep.fail_unless(holds);
    }
    Ok(rep)
}

/// Witnesses `x = -r` for `M_{0,0}(r, f^2) >= exp exp(e^{r/2})` with
/// `f(z) = exp(exp(1/z) + z)`, evaluated through `log |f|` at the
/// penultimate point and cross-checked against frozen high-precision
/// values.
pub fn verify_remark_counterexample() -> Result<VerificationReport, VerifyError> {
    const F_TOL: f64 = 1e-6;
    const LOGLOG_TOL: f64 = 1e-3;
    let mut rep = VerificationReport::for_check(Check::RemarkCounterexample, LOGLOG_TOL);
    let f = CompiledMap::parse(REMARK_MAP, PunctureSet::punctured_plane())
        .map_err(|e| VerifyError::Invalid(e.to_string()))?;
    let f2 = compose_power(&f, 2);
    rep.fail_unless(f2.has_log_abs());

    let oracle = |s: &str| s.parse::<f64>().expect("frozen constant");
    let f4 = match f.eval_complex(Complex64::new(-4.0, 0.0)).image {
        Image::Finite(w) => w,
        _ => return Err(VerifyError::Invalid("f(-4) did not evaluate to a finite value".into())),
    };
    let f_err = (f4 - oracle(REMARK_F_MINUS_4)).norm();
    rep.measure("f_at_minus_4", f4.re);
    rep.measure("f_at_minus_4_error", f_err);
    rep.fail_unless(f_err <= F_TOL);

    for (r, frozen) in [(4.0, REMARK_LOGLOG_MINUS_4), (6.0, REMARK_LOGLOG_MINUS_6)] {
        let Some(log_abs) = f2.log_abs(Complex64::new(-r, 0.0)) else {
            rep.fail_unless(false);
            rep.exceptions.push(format!("log|f^2(-{r})| not available symbolically"));
            continue;
        };
        let loglog = log_abs.ln();
        let bound = (r / 2.0).exp();
        let err = (loglog - oracle(frozen)).abs();
        rep.measure(&format!("loglog_at_minus_{r}"), loglog);
        rep.measure(&format!("oracle_error_at_minus_{r}"), err);
        rep.measure(&format!("bound_at_{r}"), bound);
        rep.fail_unless(err <= LOGLOG_TOL && loglog >= bound);
    }
    // Natural-log convention pin: base-10 logs give a different witness.
    let base10 = f2.log_abs(Complex64::new(-4.0, 0.0)).map_or(f64::NAN, f64::log10);
    rep.measure("base10_variant_at_minus_4", base10);
    rep.fail_unless((base10 - oracle(REMARK_LOGLOG_MINUS_4)).abs() > 1.0);
    rep.measure("e_squared", E * E);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::Status;

    fn map(text: &str) -> CompiledMap {
        CompiledMap::parse(text, PunctureSet::punctured_plane()).unwrap()
    }

    fn small_grid() -> MmseqConfig {
        MmseqConfig { grid: vec![2.0, 3.0, 5.0, 8.0], params: ModulusParams { n_samples: 512, refine_iters: 20 }, ..Default::default() }
    }

    #[test]
    fn lemma_on_exp_z_plus_inverse() {
        let rep = verify_mmseq_lemma(&map("exp(z+1/z)"), &small_grid()).unwrap();
        assert_eq!(rep.status, Status::Pass, "{rep}");
        assert!((rep.get("a.margin").unwrap() - (2.5 - 2.0 * 2f64.ln())).abs() < 1e-9);
        assert_eq!(rep.get("r_f"), Some(2.0));
    }

    #[test]
    fn identity_fails_part_a() {
        let rep = verify_mmseq_lemma(&map("z"), &small_grid()).unwrap();
        assert_eq!(rep.status, Status::Fail);
        assert_eq!(rep.get("a.pass"), Some(0.0));
    }

    #[test]
    fn itinerary_choice() {
        let p = |j, k| (ChartIndex(j), ChartIndex(k));
        let its = itineraries_for(&[p(0, 0), p(0, 1), p(1, 0), p(1, 1)]);
        let names: Vec<String> = its.iter().map(|e| e.to_string()).collect();
        assert_eq!(names.len(), 3);
        assert_eq!(itineraries_for(&[p(0, 0), p(0, 1)]).len(), 1);
    }

    #[test]
    fn remark_witnesses() {
        let rep = verify_remark_counterexample().unwrap();
        assert_eq!(rep.status, Status::Pass, "{rep}");
        assert!((rep.get("loglog_at_minus_4").unwrap() - 25.0581523).abs() < 1e-6);
        assert!((rep.get("loglog_at_minus_6").unwrap() - 173.039220).abs() < 1e-5);
    }
}
