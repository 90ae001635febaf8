//! Text grammar for densities and random variables on the command line.
//!
//! Densities:
//! * `uniform`
//! * `beta beta=<r>`                power density `r x^{r-1}`, r > 0
//! * `affine a=<a> b=<b>`           `a + b x`, must be positive with mass 1
//! * `steps <lo:hi:v>[,<lo:hi:v>..]` piecewise-constant, must have mass 1
//! * `divergenza`                   one-sided singular series density
//! * `co419`                        two-sided singular series density
//! * `co419 t0=<t> beta=<r>`        smooth truncation of `co419` at `t`
//!
//! Variables:
//! * `const c=<v>`
//! * `steps <lo:hi:v>[,<lo:hi:v>..]`
//! * `logx`                         `ln x`
//! * `centered-x`                   `x - 1/2`

use expmix_core::counterexamples::{co419_density, co419_q, divergenza_density};
use expmix_core::measure::{Density, LogAtom, Piece, RandomVariable};
use std::collections::BTreeMap;

fn key_values(tokens: &[&str]) -> Result<BTreeMap<String, f64>, String> {
    let mut map = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{tok}`"))?;
        let num: f64 = v.parse().map_err(|_| format!("`{v}` is not a number in `{tok}`"))?;
        if map.insert(k.to_string(), num).is_some() {
            return Err(format!("duplicate key `{k}`"));
        }
    }
    Ok(map)
}

fn steps_list(token: &str) -> Result<Vec<(f64, f64, f64)>, String> {
    let mut steps = Vec::new();
    for triple in token.split(',') {
        let parts: Vec<&str> = triple.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:value, got `{triple}`"));
        }
        let mut nums = [0.0; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| format!("`{part}` is not a number in `{triple}`"))?;
        }
        steps.push((nums[0], nums[1], nums[2]));
    }
    Ok(steps)
}

fn expect_keys(map: &BTreeMap<String, f64>, keys: &[&str]) -> Result<(), String> {
    for k in keys {
        if !map.contains_key(*k) {
            return Err(format!("missing key `{k}`"));
        }
    }
    for k in map.keys() {
        if !keys.contains(&k.as_str()) {
            return Err(format!("unknown key `{k}`"));
        }
    }
    Ok(())
}

pub fn parse_density(spec: &str) -> Result<Density, String> {
    let tokens: Vec<&str> = spec.split_whitespace().collect();
    let head = *tokens.first().ok_or("empty density spec")?;
    let err = |e: expmix_core::Error| format!("density spec `{spec}`: {e:?}");
    match head {
        "uniform" if tokens.len() == 1 => Ok(Density::uniform()),
        "beta" => {
            let kv = key_values(&tokens[1..])?;
            expect_keys(&kv, &["beta"])?;
            Density::beta(kv["beta"]).map_err(err)
        }
        "affine" => {
            let kv = key_values(&tokens[1..])?;
            expect_keys(&kv, &["a", "b"])?;
            Density::from_pieces("affine", vec![Piece::affine(0.0, 1.0, kv["a"], kv["b"])])
                .map_err(err)
        }
        "steps" if tokens.len() == 2 => {
            let steps = steps_list(tokens[1])?;
            Density::simple("steps", &steps).map_err(err)
        }
        "divergenza" if tokens.len() == 1 => Ok(divergenza_density()),
        "co419" if tokens.len() == 1 => Ok(co419_density()),
        "co419" => {
            let kv = key_values(&tokens[1..])?;
            expect_keys(&kv, &["t0", "beta"])?;
            co419_q(kv["t0"], kv["beta"]).map_err(err)
        }
        _ => Err(format!(
            "unknown density spec `{spec}` (expected uniform, beta, affine, steps, divergenza, or co419)"
        )),
    }
}

pub fn parse_variable(spec: &str) -> Result<RandomVariable, String> {
    let tokens: Vec<&str> = spec.split_whitespace().collect();
    let head = *tokens.first().ok_or("empty variable spec")?;
    match head {
        "const" => {
            let kv = key_values(&tokens[1..])?;
            expect_keys(&kv, &["c"])?;
            Ok(RandomVariable::constant(kv["c"]))
        }
        "steps" if tokens.len() == 2 => {
            let steps = steps_list(tokens[1])?;
            Ok(RandomVariable::simple("steps", &steps))
        }
        "logx" if tokens.len() == 1 => Ok(RandomVariable::from_pieces(
            "logx",
            vec![Piece::log_ratio(0.0, 1.0, 0.0, vec![LogAtom { coeff: 1.0, anchor: 0.0 }])],
        )),
        "centered-x" if tokens.len() == 1 => Ok(RandomVariable::from_pieces(
            "centered-x",
            vec![Piece::affine(0.0, 1.0, -0.5, 1.0)],
        )),
        _ => Err(format!(
            "unknown variable spec `{spec}` (expected const, steps, logx, or centered-x)"
        )),
    }
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let mut grid = Vec::new();
    for part in spec.split(',') {
        let t: f64 = part
            .trim()
            .parse()
            .map_err(|_| format!("`{part}` is not a number in grid `{spec}`"))?;
        grid.push(t);
    }
    if grid.is_empty() {
        return Err("empty grid".to_string());
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_grammar_round_trips_the_builtins() {
        assert_eq!(parse_density("uniform").unwrap().name, "uniform");
        assert_eq!(parse_density("beta beta=2").unwrap().name, "beta(2)");
        assert!(parse_density("divergenza").unwrap().has_tail());
        assert!(parse_density("co419").unwrap().has_tail());
        assert!(!parse_density("co419 t0=0.25 beta=2").unwrap().has_tail());
        let steps = parse_density("steps 0:0.5:0.5,0.5:1:1.5").unwrap();
        assert_eq!(steps.value_at(0.25), 0.5);
        let affine = parse_density("affine a=0.8 b=0.4").unwrap();
        assert!((affine.value_at(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_specs_are_rejected_with_messages() {
        assert!(parse_density("").is_err());
        assert!(parse_density("gaussian").is_err());
        assert!(parse_density("beta").is_err());
        assert!(parse_density("beta beta=0").is_err());
        assert!(parse_density("beta r=2").is_err());
        assert!(parse_density("steps 0:0.5:2").is_err()); // mass 1 violated
        assert!(parse_variable("steps 0:1:x").is_err());
        assert!(parse_grid("0.1,oops").is_err());
    }

    #[test]
    fn variable_grammar_builds_the_log_and_centered_forms() {
        let logx = parse_variable("logx").unwrap();
        assert!((logx.value_at(0.5) - 0.5f64.ln()).abs() < 1e-12);
        let cx = parse_variable("centered-x").unwrap();
        assert!((cx.value_at(0.75) - 0.25).abs() < 1e-12);
        assert_eq!(parse_variable("const c=2").unwrap().value_at(0.3), 2.0);
    }
}
