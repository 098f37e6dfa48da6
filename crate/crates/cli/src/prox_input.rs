//! Plain-text input for the `prox` subcommand.
//!
//! Lines starting with `#` carry metadata, everything else is one number per line belonging to
//! the most recently opened section:
//!
//! ```text
//! # h nonneg
//! # sign +
//! # kappa 1
//! # x
//! -1
//! 1
//! # d
//! 1
//! 1
//! # u
//! 1
//! 0
//! ```
//!
//! Sections are `x`, `d`, `u` (one per factor, signed by `sign`), `u+`, `u-`, `blocks`, `a` and
//! `b`. Scalar keys are `h`, `sign`, `kappa` and `metric` (`v` or `h`, the latter meaning the
//! factors describe the inverse metric). `d` defaults to all ones.

use std::fmt::Write as _;

use proxqn::{AffineConstraint, Blocks, LowRankMetric, ProxOperator, RootSolverReport, Sign};

#[derive(Debug)]
pub struct ProxInput {
    pub x: Vec<f64>,
    pub metric: LowRankMetric,
    pub h: ProxOperator,
    pub kappa: f64,
    /// The factors describe `H = V⁻¹`.
    pub inverse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    X,
    D,
    U(Option<Sign>),
    Blocks,
    A,
    B,
}

fn parse_sign(s: &str) -> Result<Sign, String> {
    match s {
        "+" | "plus" => Ok(Sign::Plus),
        "-" | "minus" => Ok(Sign::Minus),
        _ => Err(format!("bad sign `{s}`")),
    }
}

fn number(s: &str, line: usize) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("line {line}: `{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("line {line}: non-finite value"))
    }
}

pub fn parse(text: &str) -> Result<ProxInput, String> {
    let mut h_spec: Option<Vec<String>> = None;
    let mut sign = Sign::Plus;
    let mut kappa = 1.0;
    let mut inverse = false;
    let mut x = None;
    let mut d = None;
    let mut factors: Vec<(Option<Sign>, Vec<f64>)> = Vec::new();
    let mut blocks = None;
    let mut a = None;
    let mut b = None;
    let mut current: Option<Section> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(meta) = s.strip_prefix('#') {
            let mut words = meta.split_whitespace();
            let Some(key) = words.next() else { continue };
            let rest: Vec<String> = words.map(str::to_string).collect();
            let section = match key {
                "x" => Some(Section::X),
                "d" => Some(Section::D),
                "u" => Some(Section::U(None)),
                "u+" => Some(Section::U(Some(Sign::Plus))),
                "u-" => Some(Section::U(Some(Sign::Minus))),
                "blocks" => Some(Section::Blocks),
                "a" => Some(Section::A),
                "b" => Some(Section::B),
                _ => None,
            };
            if let Some(sec) = section {
                if !rest.is_empty() {
                    return Err(format!("line {line}: section `{key}` takes no arguments"));
                }
                let slot = match sec {
                    Section::X => &mut x,
                    Section::D => &mut d,
                    Section::Blocks => &mut blocks,
                    Section::A => &mut a,
                    Section::B => &mut b,
                    Section::U(sg) => {
                        factors.push((sg, Vec::new()));
                        current = Some(sec);
                        continue;
                    }
                };
                if slot.is_some() {
                    return Err(format!("line {line}: section `{key}` given twice"));
                }
                *slot = Some(Vec::new());
                current = Some(sec);
                continue;
            }
            let one = |what: &str| -> Result<&String, String> {
                match rest.as_slice() {
                    [v] => Ok(v),
                    _ => Err(format!("line {line}: `{what}` takes one value")),
                }
            };
            match key {
                "h" => {
                    if rest.is_empty() {
                        return Err(format!("line {line}: `h` needs a function name"));
                    }
                    h_spec = Some(rest.clone());
                }
                "sign" => sign = parse_sign(one("sign")?).map_err(|e| format!("line {line}: {e}"))?,
                "kappa" => kappa = number(one("kappa")?, line)?,
                "metric" => {
                    inverse = match one("metric")?.as_str() {
                        "v" => false,
                        "h" => true,
                        other => return Err(format!("line {line}: metric must be `v` or `h`, got `{other}`")),
                    }
                }
                // free-form comment
                _ => {}
            }
            continue;
        }
        let v = number(s, line)?;
        match current {
            None => return Err(format!("line {line}: value outside any section")),
            Some(Section::X) => x.as_mut().unwrap().push(v),
            Some(Section::D) => d.as_mut().unwrap().push(v),
            Some(Section::U(_)) => factors.last_mut().unwrap().1.push(v),
            Some(Section::Blocks) => blocks.as_mut().unwrap().push(v),
            Some(Section::A) => a.as_mut().unwrap().push(v),
            Some(Section::B) => b.as_mut().unwrap().push(v),
        }
    }

    let x = x.ok_or("missing `x` section")?;
    if x.is_empty() {
        return Err("`x` is empty".into());
    }
    let n = x.len();
    let d = d.unwrap_or_else(|| vec![1.0; n]);
    if d.len() != n {
        return Err(format!("`d` has {} entries, `x` has {n}", d.len()));
    }
    for (k, (_, u)) in factors.iter().enumerate() {
        if u.len() != n {
            return Err(format!("factor {} has {} entries, `x` has {n}", k + 1, u.len()));
        }
    }
    let h = build_h(h_spec.as_deref().ok_or("missing `h` line")?, n, blocks, a, b)?;
    let signs = factors.iter().map(|(s, _)| s.unwrap_or(sign)).collect();
    let factors = factors.into_iter().map(|(_, u)| u).collect();
    let metric = LowRankMetric::with_signs(d, factors, signs).map_err(|e| e.to_string())?;
    Ok(ProxInput { x, metric, h, kappa, inverse })
}

fn build_h(spec: &[String], n: usize, blocks: Option<Vec<f64>>, a: Option<Vec<f64>>, b: Option<Vec<f64>>) -> Result<ProxOperator, String> {
    let name = spec[0].as_str();
    let params: Vec<f64> = spec[1..]
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| format!("`h {name}`: `{s}` is not a number")))
        .collect::<Result<_, _>>()?;
    let want = |k: usize| -> Result<(), String> {
        if params.len() == k {
            Ok(())
        } else {
            Err(format!("`h {name}` takes {k} parameter(s), got {}", params.len()))
        }
    };
    let h = match name {
        "zero" => want(0).map(|_| Ok(ProxOperator::zero()))?,
        "nonneg" => want(0).map(|_| Ok(ProxOperator::nonneg()))?,
        "nonpos" => want(0).map(|_| Ok(ProxOperator::nonpos()))?,
        "l1" => want(1).map(|_| ProxOperator::l1(params[0]))?,
        "hinge" => want(1).map(|_| ProxOperator::hinge(params[0]))?,
        "box" => want(2).map(|_| ProxOperator::boxed(params[0], params[1]))?,
        "linf_ball" => want(1).map(|_| ProxOperator::linf_ball(params[0]))?,
        "simplex" => want(1).map(|_| ProxOperator::simplex(params[0]))?,
        "l1_ball" => want(1).map(|_| ProxOperator::l1_ball(params[0]))?,
        "linf_norm" => want(1).map(|_| ProxOperator::linf_norm(params[0]))?,
        "max" => want(1).map(|_| ProxOperator::max(params[0]))?,
        "group" => {
            want(1)?;
            let sizes = match blocks {
                Some(v) => v
                    .iter()
                    .map(|&s| if s >= 1.0 && s.fract() == 0.0 { Ok(s as usize) } else { Err(format!("bad block size {s}")) })
                    .collect::<Result<Vec<_>, _>>()?,
                None => vec![n],
            };
            let blocks = Blocks::from_sizes(&sizes).map_err(|e| e.to_string())?;
            if blocks.dim() != n {
                return Err(format!("block sizes sum to {}, `x` has {n}", blocks.dim()));
            }
            ProxOperator::group_l2(params[0], blocks)
        }
        "affine" => {
            want(0)?;
            let a = a.ok_or("`h affine` needs an `a` section")?;
            let b = b.ok_or("`h affine` needs a `b` section")?;
            let m = b.len();
            if m == 0 || a.len() != m * n {
                return Err(format!("`a` must hold {m}×{n} values row by row, got {}", a.len()));
            }
            AffineConstraint::new(m, n, a, b).map(ProxOperator::affine)
        }
        other => return Err(format!("unknown function `{other}`")),
    };
    h.map_err(|e| e.to_string())
}

/// Renders the result in the input format, so the output can be parsed the same way.
pub fn render(z: &[f64], report: &RootSolverReport) -> String {
    let mut out = String::new();
    writeln!(out, "# method {}", report.method.as_str()).unwrap();
    writeln!(out, "# iterations {}", report.iterations).unwrap();
    writeln!(out, "# residual {:e}", report.residual).unwrap();
    write!(out, "# alpha").unwrap();
    for a in &report.alpha_star {
        write!(out, " {a}").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "# z").unwrap();
    for v in z {
        writeln!(out, "{v}").unwrap();
    }
    out
}
