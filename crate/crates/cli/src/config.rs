//! JSON config loading with dotted-path overrides and a canonical hash.

use std::path::Path;

use beamtrack::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// A resolved config plus the canonical JSON it was built from.
pub struct Resolved<T> {
    pub value: T,
    pub json: Value,
}

impl<T> Resolved<T> {
    /// SHA-256 of the canonical (key-sorted, compact) JSON.
    pub fn hash(&self) -> String {
        hash_json(&self.json)
    }
}

pub fn hash_json(v: &Value) -> String {
    // serde_json's default map type keeps keys sorted, so this is canonical
    let text = serde_json::to_string(v).expect("json values serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Starts from `T::default()`, merges the file at `path` (if any), then
/// applies `key.path=value` overrides. Keys absent from the defaults are
/// rejected so that typos do not pass silently.
pub fn load<T>(path: Option<&Path>, sets: &[String]) -> Result<Resolved<T>>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut json = serde_json::to_value(T::default())?;
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        let file: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        merge(&mut json, file, "")?;
    }
    for s in sets {
        apply_set(&mut json, s)?;
    }
    let value: T = serde_json::from_value(json.clone()).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    // re-serialise so the hash covers the normalised form
    let json = serde_json::to_value(&value)?;
    Ok(Resolved { value, json })
}

fn merge(base: &mut Value, over: Value, at: &str) -> Result<()> {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &path)?,
                    None => return Err(Error::Config(format!("unknown config key {path}"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// `a.b.c=value`; the value is parsed as JSON, falling back to a string.
pub fn apply_set(json: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form key.path=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = json;
    for key in path.split('.') {
        slot = match slot {
            Value::Object(m) => m.get_mut(key),
            Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::Config(format!("unknown config key {path}")))?;
    }
    *slot = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Default, Serialize, Deserialize)]
    #[serde(default)]
    struct Inner {
        x: f64,
        tag: Option<String>,
    }

    #[derive(Default, Serialize, Deserialize)]
    #[serde(default)]
    struct Outer {
        inner: Inner,
        n: usize,
    }

    #[test]
    fn overrides_and_hash() {
        let r: Resolved<Outer> = load(None, &["inner.x=2.5".into(), "inner.tag=hi".into(), "n=3".into()]).unwrap();
        assert_eq!(r.value.inner.x, 2.5);
        assert_eq!(r.value.inner.tag.as_deref(), Some("hi"));
        assert_eq!(r.value.n, 3);
        assert!(load::<Outer>(None, &["inner.y=1".into()]).is_err());
        assert!(load::<Outer>(None, &["n=minus".into()]).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a": 1, "b": {"c": 2, "d": 3}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b": {"d": 3, "c": 2}, "a": 1}"#).unwrap();
        assert_eq!(hash_json(&a), hash_json(&b));
        assert_eq!(hash_json(&a).len(), 64);
    }

    #[test]
    fn file_keys_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"inner": {"x": 1.0}, "bogus": 1}"#).unwrap();
        assert!(load::<Outer>(Some(&p), &[]).is_err());
        std::fs::write(&p, r#"{"inner": {"x": 1.0}}"#).unwrap();
        assert_eq!(load::<Outer>(Some(&p), &[]).unwrap().value.inner.x, 1.0);
    }
}
