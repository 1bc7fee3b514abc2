//! Serialization helpers shared by every report type.
//!
//! Reports must be byte-identical across runs and across worker counts, so:
//! rationals serialize as `"numer/denom"` strings, floats as 17-significant-
//! digit strings, and every map is ordered. No timestamps, no hostnames.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::Zero;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;
use std::str::FromStr;

pub fn rat_to_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn rat_from_string(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let numer = BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
        let denom =
            BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
        if denom.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(BigRational::new(numer, denom));
    }
    let numer = BigInt::from_str(s).map_err(|e| format!("not an exact rational: {s:?} ({e})"))?;
    Ok(BigRational::from_integer(numer))
}

/// `#[serde(serialize_with = ...)]` adapter for a single rational.
pub fn ser_rat<S: Serializer>(r: &BigRational, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&rat_to_string(r))
}

/// Adapter for `Option<BigRational>`.
pub fn ser_rat_opt<S: Serializer>(
    r: &Option<BigRational>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => serializer.serialize_some(&rat_to_string(r)),
        None => serializer.serialize_none(),
    }
}

/// Adapter for a float: 17 significant digits, round-trips exactly.
pub fn ser_f64<S: Serializer>(v: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&crate::scalar::fmt_float17(*v))
}

/// Adapter for maps keyed by index vectors (stopping profiles): the key
/// `[1, 3, 4]` becomes `"1,3,4"` and the order is the BTreeMap order.
pub fn ser_index_map<S: Serializer>(
    map: &BTreeMap<Vec<usize>, BigRational>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    let rendered: BTreeMap<String, String> = map
        .iter()
        .map(|(k, v)| {
            let key = k
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",");
            (key, rat_to_string(v))
        })
        .collect();
    rendered.serialize(serializer)
}

/// Pretty JSON with a trailing newline; the single rendering used everywhere
/// so identical values always produce identical bytes.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types always serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_strings_round_trip() {
        for text in ["1/2", "-7/3", "0/1", "12345678901234567890/7"] {
            let r = rat_from_string(text).unwrap();
            assert_eq!(rat_to_string(&r), text);
        }
        assert_eq!(rat_to_string(&rat_from_string("4/6").unwrap()), "2/3");
        assert_eq!(rat_to_string(&rat_from_string("5").unwrap()), "5/1");
        assert!(rat_from_string("1/0").is_err());
        assert!(rat_from_string("0.5").is_err());
    }

    #[test]
    fn index_maps_render_sorted_and_stable() {
        #[derive(Serialize)]
        struct Wrap {
            #[serde(serialize_with = "ser_index_map")]
            blocks: BTreeMap<Vec<usize>, BigRational>,
        }
        let mut blocks = BTreeMap::new();
        blocks.insert(vec![2, 3], rat_from_string("1/4").unwrap());
        blocks.insert(vec![1, 2], rat_from_string("1/2").unwrap());
        let json = to_json_pretty(&Wrap { blocks });
        let first = json.find("\"1,2\"").unwrap();
        let second = json.find("\"2,3\"").unwrap();
        assert!(first < second);
    }
}
