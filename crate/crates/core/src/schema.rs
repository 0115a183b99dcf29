//! JSON file formats.
//!
//! ```text
//! joint     {"vars": ["X", "Y"], "sizes": [2, 2], "pmf": [[0.4, 0.1], [0.1, 0.4]]}
//! function  {"scope": ["X"], "table": [1.0, 2.0]}
//! box       {"x": 2, "y": 2, "a": 2, "b": 2, "p": [[[[…]]]]}      p[x][y][a][b], optional "meta"
//! strategy  {"n": 2, "inputs": [2, 2], "outputs": [2, 2],
//!            "alice": {"choice": {"x0|": [{"box": 0, "input": 0, "p": 1.0}], …},
//!                      "output": {"x0|0,0,1;1,1,0": [{"output": 1, "p": 1.0}], …}},
//!            "bob": {…}}
//! ```
//!
//! Joint pmfs are nested with the first variable outermost; a flat row-major
//! list is also accepted. Function tables are flat row-major. Strategy keys are [`transcript_key`](crate::boxes::transcript_key)s;
//! box indices are 0-based.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::boxes::{NsBox, TablePolicy, WiringStrategy};
use crate::{Error, JointDistribution, RandomFunction, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointFile {
    pub vars: Vec<String>,
    pub sizes: Vec<usize>,
    pub pmf: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFile {
    pub scope: Vec<String>,
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFile {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub b: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
    /// Free-form provenance, ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFile {
    pub n: usize,
    #[serde(default = "binary")]
    pub inputs: [usize; 2],
    #[serde(default = "binary")]
    pub outputs: [usize; 2],
    pub alice: TablePolicy,
    pub bob: TablePolicy,
}

fn binary() -> [usize; 2] {
    [2, 2]
}

/// Deserializes `text`, naming the failing field in errors. `source` labels
/// the input (usually the file path).
pub fn parse<T: DeserializeOwned>(text: &str, source: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: field_path(source, &e.path().to_string()),
        message: e.into_inner().to_string(),
    })
}

fn field_path(source: &str, field: &str) -> String {
    if field.is_empty() || field == "." {
        source.to_string()
    } else {
        format!("{source}: {field}")
    }
}

fn invalid(source: &str, field: &str, e: Error) -> Error {
    Error::Schema {
        path: field_path(source, field),
        message: e.to_string(),
    }
}

pub fn joint_from_json(text: &str, source: &str) -> Result<JointDistribution> {
    let f: JointFile = parse(text, source)?;
    let p = flatten_pmf(&f.pmf, &f.sizes, source)?;
    JointDistribution::new(f.vars, f.sizes, &p).map_err(|e| invalid(source, "pmf", e))
}

fn flatten_pmf(v: &serde_json::Value, sizes: &[usize], source: &str) -> Result<Vec<f64>> {
    let total: usize = sizes.iter().product();
    let flat = v.as_array().is_some_and(|a| a.len() == total && a.iter().all(|x| x.is_number()));
    let mut out = Vec::with_capacity(total);
    if flat && sizes.len() != 1 {
        walk(v, &[total], "pmf".into(), source, &mut out)?;
    } else {
        walk(v, sizes, "pmf".into(), source, &mut out)?;
    }
    Ok(out)
}

fn walk(v: &serde_json::Value, shape: &[usize], path: String, source: &str, out: &mut Vec<f64>) -> Result<()> {
    let err = |path: &str, message: String| Error::Schema {
        path: field_path(source, path),
        message,
    };
    match shape.split_first() {
        None => {
            let x = v.as_f64().ok_or_else(|| err(&path, format!("expected a number, got {v}")))?;
            out.push(x);
            Ok(())
        }
        Some((&n, rest)) => {
            let a = v.as_array().ok_or_else(|| err(&path, format!("expected an array of length {n}")))?;
            if a.len() != n {
                return Err(err(&path, format!("expected length {n}, got {}", a.len())));
            }
            for (i, x) in a.iter().enumerate() {
                walk(x, rest, format!("{path}[{i}]"), source, out)?;
            }
            Ok(())
        }
    }
}

fn nest(p: &[f64], shape: &[usize]) -> serde_json::Value {
    match shape.split_first() {
        None => serde_json::json!(p[0]),
        Some((&n, rest)) => {
            let stride = p.len() / n.max(1);
            serde_json::Value::Array((0..n).map(|i| nest(&p[i * stride..(i + 1) * stride], rest)).collect())
        }
    }
}

pub fn joint_to_file(d: &JointDistribution) -> JointFile {
    JointFile {
        vars: d.vars().to_vec(),
        sizes: d.sizes().to_vec(),
        pmf: nest(&d.dense(), d.sizes()),
    }
}

pub fn function_from_json(text: &str, source: &str) -> Result<RandomFunction> {
    let f: FunctionFile = parse(text, source)?;
    RandomFunction::new(f.scope, f.table).map_err(|e| invalid(source, "table", e))
}

pub fn box_from_json(text: &str, source: &str) -> Result<NsBox> {
    let f: BoxFile = parse(text, source)?;
    let b = NsBox::from_nested(&f.p).map_err(|e| invalid(source, "p", e))?;
    if b.sizes() != [f.x, f.y, f.a, f.b] {
        return Err(Error::Schema {
            path: field_path(source, "p"),
            message: format!(
                "tensor has shape {:?}, header says {:?}",
                b.sizes(),
                [f.x, f.y, f.a, f.b]
            ),
        });
    }
    Ok(b)
}

pub fn box_to_file(b: &NsBox) -> BoxFile {
    let [x, y, a, bb] = b.sizes();
    BoxFile {
        x,
        y,
        a,
        b: bb,
        p: b.nested(),
        meta: None,
    }
}

/// Loads a strategy and checks it against `boxes` by enumerating every
/// reachable transcript.
pub fn strategy_from_json(text: &str, source: &str, boxes: &[NsBox]) -> Result<WiringStrategy> {
    let f: StrategyFile = parse(text, source)?;
    let s = WiringStrategy::new(f.n, f.inputs, f.outputs, f.alice, f.bob);
    s.tabulate(boxes).map_err(|e| invalid(source, "alice/bob", e))?;
    Ok(s)
}

/// Tabulated form of any strategy, for writing to disk.
pub fn strategy_to_file(s: &WiringStrategy, boxes: &[NsBox]) -> Result<StrategyFile> {
    let (alice, bob) = s.tabulate(boxes)?;
    Ok(StrategyFile {
        n: s.n,
        inputs: s.inputs,
        outputs: s.outputs,
        alice,
        bob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::{make_standard_box, wired_box, xor_wiring, StandardBox};

    #[test]
    fn joint_round_trip() {
        let d = joint_from_json(r#"{"vars":["X","Y"],"sizes":[2,2],"pmf":[[0.4,0.1],[0.1,0.4]]}"#, "j.json").unwrap();
        assert_eq!(d.dense(), vec![0.4, 0.1, 0.1, 0.4]);
        let flat = joint_from_json(r#"{"vars":["X","Y"],"sizes":[2,2],"pmf":[0.4,0.1,0.1,0.4]}"#, "j.json").unwrap();
        assert_eq!(flat, d);
        let text = serde_json::to_string(&joint_to_file(&d)).unwrap();
        assert!(text.contains("[[0.4,0.1],[0.1,0.4]]"), "{text}");
    }

    #[test]
    fn errors_name_the_field() {
        let e = joint_from_json(r#"{"vars":["X"],"sizes":[2],"pmf":[0.5,"x"]}"#, "j.json").unwrap_err();
        match e {
            Error::Schema { path, .. } => assert_eq!(path, "j.json: pmf[1]"),
            other => panic!("{other:?}"),
        }
        let e = joint_from_json(r#"{"vars":["X"],"sizes":[2],"pmf":[0.5,0.6]}"#, "j.json").unwrap_err();
        assert!(matches!(e, Error::Schema { ref path, .. } if path == "j.json: pmf"), "{e:?}");
        let e = joint_from_json(r#"{"vars":["X","Y"],"sizes":[2,2],"pmf":[[0.5,0.5],[0.0]]}"#, "j.json").unwrap_err();
        assert!(matches!(e, Error::Schema { ref path, .. } if path == "j.json: pmf[1]"), "{e:?}");
        let e = box_from_json(r#"{"x":2,"y":2,"a":2,"b":2,"p":[],"q":1}"#, "b.json").unwrap_err();
        assert!(matches!(e, Error::Schema { .. }));
    }

    #[test]
    fn box_round_trip() {
        let pr = make_standard_box(&StandardBox::Pr).unwrap();
        let text = serde_json::to_string(&box_to_file(&pr)).unwrap();
        assert_eq!(box_from_json(&text, "pr.json").unwrap(), pr);
    }

    #[test]
    fn strategy_round_trip() {
        let boxes = vec![make_standard_box(&StandardBox::Pr).unwrap(); 2];
        let s = xor_wiring(2);
        let text = serde_json::to_string(&strategy_to_file(&s, &boxes).unwrap()).unwrap();
        let back = strategy_from_json(&text, "s.json", &boxes).unwrap();
        assert_eq!(wired_box(&boxes, &back).unwrap(), wired_box(&boxes, &s).unwrap());
        let broken = text.replace("\"x1|\"", "\"x9|\"");
        assert!(strategy_from_json(&broken, "s.json", &boxes).is_err());
    }
}
