//! Purity of the target state conditioned on a clear error flag.

use crate::error::{Error, Result};

fn check(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} = {p} is not a probability")))
    }
}

/// `P(target | flag = 0)` for pre-flag success probability `s` and
/// classifier infidelities `eps01` (target reads bright) and `eps10`
/// (error reads dark).
pub fn conditional_purity(s: f64, eps01: f64, eps10: f64) -> Result<f64> {
    check("s", s)?;
    check("eps01", eps01)?;
    check("eps10", eps10)?;
    let good = s * (1.0 - eps01);
    let denom = good + (1.0 - s) * eps10;
    if denom <= 0.0 {
        return Err(Error::UndefinedStatistic("conditional purity with P(flag = 0) = 0"));
    }
    Ok(good / denom)
}

/// Enumerate the four `(state, flag)` outcomes and condition on flag 0.
pub fn purity_by_enumeration(s: f64, eps01: f64, eps10: f64) -> Result<f64> {
    let outcomes = [
        (true, false, s * (1.0 - eps01)),
        (true, true, s * eps01),
        (false, false, (1.0 - s) * eps10),
        (false, true, (1.0 - s) * (1.0 - eps10)),
    ];
    let clear: f64 = outcomes.iter().filter(|o| !o.1).map(|o| o.2).sum();
    let good: f64 = outcomes.iter().filter(|o| o.0 && !o.1).map(|o| o.2).sum();
    if clear <= 0.0 {
        return Err(Error::UndefinedStatistic("conditional purity with P(flag = 0) = 0"));
    }
    Ok(good / clear)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(conditional_purity(1.0, 0.3, 0.2).unwrap(), 1.0);
        assert!((conditional_purity(0.7, 0.0, 1.0).unwrap() - 0.7).abs() < 1e-15);
        let p = conditional_purity(0.95, 0.01, 0.033).unwrap();
        assert!((p - 0.99825).abs() < 1e-5, "{p}");
        assert!(matches!(conditional_purity(0.0, 0.1, 0.0), Err(Error::UndefinedStatistic(_))));
        assert!(conditional_purity(1.2, 0.1, 0.1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn closed_form_matches_enumeration(s in 0.0f64..=1.0, e01 in 0.0f64..=1.0, e10 in 0.0f64..=1.0) {
            match (conditional_purity(s, e01, e10), purity_by_enumeration(s, e01, e10)) {
                (Ok(a), Ok(b)) => proptest::prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                (a, b) => proptest::prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }
    }
}
