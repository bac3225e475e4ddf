//! The value universe shared by invocations, responses, base-object
//! registers and sequential-specification states.

use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

/// A payload value.
///
/// JSON form: `null` for [`Value::Nil`], the strings `"OK"`, `"EMPTY"`,
/// `"EPSILON"` and `"BOTTOM"` for the distinguished constants, numbers for
/// [`Value::Int`], decimal strings for [`Value::Big`] and arrays for
/// [`Value::List`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum Value {
    /// No argument / no payload.
    Nil,
    /// The acknowledgement returned by writes, enqueues, pushes and puts.
    Ok,
    /// Returned by a dequeue or take on an empty object.
    Empty,
    /// Returned by a pop on an empty stack.
    Epsilon,
    /// The initial content of an unwritten register.
    Bottom,
    Int(i64),
    /// Integers too large for `i64`; always normalized to [`Value::Int`]
    /// when they fit.
    Big(BigInt),
    List(Vec<Value>),
}

impl Value {
    pub fn int(v: i64) -> Self {
        Value::Int(v)
    }

    pub fn from_big(b: BigInt) -> Self {
        match b.to_i64() {
            Some(v) => Value::Int(v),
            None => Value::Big(b),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Big(b) => b.to_i64(),
            _ => None,
        }
    }

    pub fn as_big(&self) -> Option<BigInt> {
        match self {
            Value::Int(v) => Some(BigInt::from(*v)),
            Value::Big(b) => Some(b.clone()),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Value::Bottom)
    }

    /// Parses the compact textual form used on the command line:
    /// `OK`, `EMPTY`, `EPSILON`, `BOTTOM`, `-`, integers and `[a,b,..]`.
    pub fn parse(text: &str) -> Option<Value> {
        let text = text.trim();
        match text {
            "" | "-" | "nil" => return Some(Value::Nil),
            "OK" => return Some(Value::Ok),
            "EMPTY" => return Some(Value::Empty),
            "EPSILON" | "ε" => return Some(Value::Epsilon),
            "BOTTOM" | "⊥" => return Some(Value::Bottom),
            _ => {}
        }
        if let Some(inner) = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            if inner.trim().is_empty() {
                return Some(Value::List(Vec::new()));
            }
            return inner.split(',').map(Value::parse).collect::<Option<Vec<_>>>().map(Value::List);
        }
        text.parse::<BigInt>().ok().map(Value::from_big)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("-"),
            Value::Ok => f.write_str("OK"),
            Value::Empty => f.write_str("EMPTY"),
            Value::Epsilon => f.write_str("ε"),
            Value::Bottom => f.write_str("⊥"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Big(b) => write!(f, "{b}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<Value> for serde_json::Value {
    fn from(v: Value) -> Self {
        match v {
            Value::Nil => serde_json::Value::Null,
            Value::Ok => "OK".into(),
            Value::Empty => "EMPTY".into(),
            Value::Epsilon => "EPSILON".into(),
            Value::Bottom => "BOTTOM".into(),
            Value::Int(i) => i.into(),
            Value::Big(b) => b.to_string().into(),
            Value::List(items) => serde_json::Value::Array(items.into_iter().map(Into::into).collect()),
        }
    }
}

impl TryFrom<serde_json::Value> for Value {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, Self::Error> {
        match v {
            serde_json::Value::Null => Ok(Value::Nil),
            serde_json::Value::Number(n) => n.as_i64().map(Value::Int).ok_or_else(|| format!("non-integer number {n}")),
            serde_json::Value::String(s) => match s.as_str() {
                "OK" => Ok(Value::Ok),
                "EMPTY" => Ok(Value::Empty),
                "EPSILON" => Ok(Value::Epsilon),
                "BOTTOM" => Ok(Value::Bottom),
                digits => digits
                    .parse::<BigInt>()
                    .map(Value::from_big)
                    .map_err(|_| format!("unknown value string {digits:?}")),
            },
            serde_json::Value::Array(items) => {
                items.into_iter().map(Value::try_from).collect::<Result<Vec<_>, _>>().map(Value::List)
            }
            other => Err(format!("unsupported JSON value {other}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        let v = Value::List(vec![Value::Ok, Value::Int(3), Value::Nil, Value::Bottom]);
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"["OK",3,null,"BOTTOM"]"#);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn big_values_normalize() {
        let huge: BigInt = BigInt::from(1u8) << 100;
        let v = Value::from_big(huge.clone());
        assert_eq!(v, Value::Big(huge));
        assert_eq!(Value::from_big(BigInt::from(7)), Value::Int(7));
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Value>(&text).unwrap(), v);
    }

    #[test]
    fn parse_cli_forms() {
        assert_eq!(Value::parse("OK"), Some(Value::Ok));
        assert_eq!(Value::parse("-"), Some(Value::Nil));
        assert_eq!(Value::parse("[1,2]"), Some(Value::List(vec![1.into(), 2.into()])));
        assert_eq!(Value::parse("x"), None);
    }
}
