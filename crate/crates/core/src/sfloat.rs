//! Serde adapter for `f64` fields that may legitimately be infinite.
//!
//! JSON has no literal for infinities, so finite values serialize as
//! numbers and infinities as the strings `"inf"` / `"-inf"`. Apply with
//! `#[serde(with = "crate::sfloat")]`. NaN is rejected in both
//! directions.

use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        Err(serde::ser::Error::custom("NaN is not representable"))
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Word(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) if v.is_nan() => Err(serde::de::Error::custom("NaN is not representable")),
        Raw::Num(v) => Ok(v),
        Raw::Word(w) => match w.as_str() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            other => Err(serde::de::Error::custom(format!(
                "expected a number, \"inf\", or \"-inf\", got {other:?}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Holder {
        #[serde(with = "crate::sfloat")]
        value: f64,
    }

    #[test]
    fn finite_values_stay_numeric() {
        let text = serde_json::to_string(&Holder { value: 2.5 }).unwrap();
        assert_eq!(text, r#"{"value":2.5}"#);
        let back: Holder = serde_json::from_str(&text).unwrap();
        assert_eq!(back.value, 2.5);
    }

    #[test]
    fn infinities_round_trip_as_strings() {
        for v in [f64::INFINITY, f64::NEG_INFINITY] {
            let text = serde_json::to_string(&Holder { value: v }).unwrap();
            let back: Holder = serde_json::from_str(&text).unwrap();
            assert_eq!(back.value, v, "round-trip of {v} via {text}");
        }
    }

    #[test]
    fn junk_strings_are_rejected_with_context() {
        let err = serde_json::from_str::<Holder>(r#"{"value":"huge"}"#).unwrap_err();
        assert!(err.to_string().contains("huge"));
    }
}
