//! Result JSON: exact rational string, 12-significant-digit decimal, method
//! label, and for sampled values the full sampling plan.

use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use rankexplain::approx::{McEstimate, SamplingPlan};
use rankexplain::Rational;

pub const SIGNIFICANT_DIGITS: usize = 12;

fn pow10(e: u32) -> Rational {
    Rational::from_integer(num_traits::pow(10.into(), e as usize))
}

/// Exact decimal rendering of `value` rounded half away from zero to
/// `digits` significant digits. Positional notation for moderate
/// magnitudes, `d.ddde±x` otherwise.
pub fn decimal(value: &Rational, digits: usize) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let sign = if value.is_negative() { "-" } else { "" };
    let abs = value.abs();
    // exponent e with 10^e ≤ |v| < 10^(e+1)
    let mut e: i64 = abs.numer().to_string().len() as i64 - abs.denom().to_string().len() as i64;
    let scale = |e: i64| if e >= 0 { pow10(e as u32) } else { pow10((-e) as u32).recip() };
    while abs < scale(e) {
        e -= 1;
    }
    while abs >= scale(e + 1) {
        e += 1;
    }
    let shift = digits as i64 - 1 - e;
    let scaled = &abs * scale(shift);
    let half = Rational::new(1.into(), 2.into());
    let mut mantissa = (scaled + half).floor().to_integer();
    let mut e = e;
    if mantissa.to_string().len() > digits {
        mantissa /= 10;
        e += 1;
    }
    let text = mantissa.to_string();
    let body = if (-7..21).contains(&e) {
        let point = e + 1;
        let s = if point <= 0 {
            format!("0.{}{}", "0".repeat((-point) as usize), text)
        } else if point as usize >= text.len() {
            format!("{}{}", text, "0".repeat(point as usize - text.len()))
        } else {
            format!("{}.{}", &text[..point as usize], &text[point as usize..])
        };
        trim_fraction(s)
    } else {
        let s = trim_fraction(format!("{}.{}", &text[..1], &text[1..]));
        format!("{s}e{e}")
    };
    format!("{sign}{body}")
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn value_fields(value: &Rational) -> serde_json::Map<String, Value> {
    let mut map = serde_json::Map::new();
    map.insert("value".into(), json!(value.to_string()));
    map.insert("decimal".into(), json!(decimal(value, SIGNIFICANT_DIGITS)));
    map
}

pub fn exact_result(value: &Rational, method: &str) -> Value {
    let mut map = value_fields(value);
    map.insert("method".into(), json!(format!("exact:{method}")));
    Value::Object(map)
}

pub fn plan_json(plan: &SamplingPlan) -> Value {
    json!({
        "epsilon": plan.epsilon.to_string(),
        "delta": plan.delta.to_string(),
        "seed": plan.seed,
        "samples": plan.samples,
        "range_width": plan.range_width.to_string(),
        "samples_derived": plan.derived,
        "rng": plan.rng_algorithm(),
    })
}

pub fn sampled_result(estimate: &McEstimate) -> Value {
    let mut map = value_fields(&estimate.value);
    map.insert("method".into(), json!("approx:monte-carlo"));
    map.insert("plan".into(), plan_json(&estimate.plan));
    Value::Object(map)
}

/// Adds `key: value` to an object result.
pub fn with(mut result: Value, key: &str, value: Value) -> Value {
    if let Value::Object(map) = &mut result {
        map.insert(key.to_string(), value);
    }
    result
}
