//! JSON documents for realizations, controllers and internal data.
//!
//! Matrices are nested row arrays; every number is written with 17
//! significant digits so values survive a round trip bit for bit.

use serde::de::Deserializer;
use serde::ser::{Error as _, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::internal_map::InternalData;
use crate::linalg::Mat;
use crate::structured::{BlockPartition, ClassTag, Signature, StructuredRealization};
use crate::synthesis::{Controller, ImplHint};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!("non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Num)
    }
}

type Rows = Vec<Vec<Num>>;

fn rows(m: &Mat) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| Num(m[(i, j)])).collect()).collect()
}

fn matrix(name: &str, rows: &Rows, r: usize, c: usize) -> Result<Mat> {
    // an empty array stands for any matrix with no entries
    if rows.is_empty() && r * c == 0 {
        return Ok(Mat::zeros(r, c));
    }
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!("{name} must be {r}x{c}")));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j].0))
}

fn signature(name: &str, v: &[i8], len: usize) -> Result<Signature> {
    if v.len() != len {
        return Err(Error::Dimension(format!("{name} must have {len} entries")));
    }
    Signature::new(v.to_vec())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PartitionDoc {
    row_split: usize,
    col_split: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_split: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum HintDoc {
    TerminateResistors { ohms: Num },
    CopyNetworkPlusResistors { ohms: Num },
    DualNetwork { netlist: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RealizationDoc {
    n: usize,
    m: usize,
    p: usize,
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Rows,
    #[serde(rename = "C")]
    c: Rows,
    #[serde(rename = "D")]
    d: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_int: Option<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_ext: Option<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<PartitionDoc>,
    // controller documents
    #[serde(default, skip_serializing_if = "Option::is_none")]
    impl_hint: Option<Option<HintDoc>>,
    // internal-data documents
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_int_dagger: Option<Vec<i8>>,
    #[serde(default, rename = "n_C", skip_serializing_if = "Option::is_none")]
    n_c: Option<usize>,
    #[serde(default, rename = "n_L", skip_serializing_if = "Option::is_none")]
    n_l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    permutation: Option<Vec<usize>>,
}

impl RealizationDoc {
    fn plain(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Self {
        RealizationDoc {
            n: a.nrows(),
            m: d.ncols(),
            p: d.nrows(),
            a: rows(a),
            b: rows(b),
            c: rows(c),
            d: rows(d),
            sigma_int: None,
            sigma_ext: None,
            class_tag: None,
            partition: None,
            impl_hint: None,
            theta: None,
            gamma: None,
            phi: None,
            sigma_int_dagger: None,
            n_c: None,
            n_l: None,
            permutation: None,
        }
    }

    fn from_realization(r: &StructuredRealization) -> Self {
        let mut doc = Self::plain(r.a(), r.b(), r.c(), r.d());
        doc.sigma_int = r.sigma_int().map(|s| s.entries().to_vec());
        doc.sigma_ext = r.sigma_ext().map(|s| s.entries().to_vec());
        doc.class_tag = Some(r.class_tag().name().to_string());
        doc.partition = r.partition().map(|p| PartitionDoc { row_split: p.row_split, col_split: p.col_split, state_split: p.state_split });
        doc
    }

    fn blocks(&self) -> Result<(Mat, Mat, Mat, Mat)> {
        let (n, m, p) = (self.n, self.m, self.p);
        Ok((matrix("A", &self.a, n, n)?, matrix("B", &self.b, n, m)?, matrix("C", &self.c, p, n)?, matrix("D", &self.d, p, m)?))
    }

    fn realization(&self) -> Result<StructuredRealization> {
        let (a, b, c, d) = self.blocks()?;
        let base = StructuredRealization::new(a, b, c, d)?;
        let sigmas = match (&self.sigma_int, &self.sigma_ext) {
            (Some(si), Some(se)) => {
                let si = signature("sigma_int", si, self.n)?;
                let se = signature("sigma_ext", se, self.m)?;
                base.clone().with_signatures(si.clone(), se.clone())?;
                Some((si, se))
            }
            (None, None) => None,
            _ => return Err(Error::Structure("sigma_int and sigma_ext must be given together".into())),
        };
        let tag = match &self.class_tag {
            Some(t) => ClassTag::parse(t).ok_or_else(|| Error::Structure(format!("unknown class tag {t:?}")))?,
            None => ClassTag::Unstructured,
        };
        let partition =
            self.partition.map(|p| BlockPartition { row_split: p.row_split, col_split: p.col_split, state_split: p.state_split });
        if tag != ClassTag::Unstructured || partition.is_some() {
            base.clone().with_tag(tag, partition)?;
        }
        let (si, se) = sigmas.unzip();
        Ok(base.with_raw_meta(si, se, tag, partition))
    }
}

fn encode(doc: &RealizationDoc) -> Result<String> {
    Ok(serde_json::to_string_pretty(doc)?)
}

fn decode(text: &str) -> Result<RealizationDoc> {
    Ok(serde_json::from_str(text)?)
}

pub fn realization_to_json(r: &StructuredRealization) -> Result<String> {
    encode(&RealizationDoc::from_realization(r))
}

/// Parses and re-validates any signatures, class tag and partition.
pub fn realization_from_json(text: &str) -> Result<StructuredRealization> {
    decode(text)?.realization()
}

pub fn controller_to_json(k: &Controller) -> Result<String> {
    let mut doc = RealizationDoc::plain(&k.a, &k.b, &k.c, &k.d);
    doc.impl_hint = Some(k.impl_hint.as_ref().map(|h| match h {
        ImplHint::TerminateResistors { ohms } => HintDoc::TerminateResistors { ohms: Num(*ohms) },
        ImplHint::CopyNetworkPlusResistors { ohms } => HintDoc::CopyNetworkPlusResistors { ohms: Num(*ohms) },
        ImplHint::DualNetwork { netlist } => HintDoc::DualNetwork { netlist: netlist.clone() },
    }));
    encode(&doc)
}

pub fn controller_from_json(text: &str) -> Result<Controller> {
    let doc = decode(text)?;
    let (a, b, c, d) = doc.blocks()?;
    let mut k = Controller::new(a, b, c, d)?;
    k.impl_hint = doc.impl_hint.flatten().map(|h| match h {
        HintDoc::TerminateResistors { ohms } => ImplHint::TerminateResistors { ohms: ohms.0 },
        HintDoc::CopyNetworkPlusResistors { ohms } => ImplHint::CopyNetworkPlusResistors { ohms: ohms.0 },
        HintDoc::DualNetwork { netlist } => ImplHint::DualNetwork { netlist },
    });
    Ok(k)
}

/// The realization document extended with the reactance data; the internal
/// and external signatures are the realization's own.
pub fn internal_to_json(r: &StructuredRealization, data: &InternalData) -> Result<String> {
    let mut doc = RealizationDoc::from_realization(r);
    doc.sigma_int = Some(data.sigma_int.entries().to_vec());
    doc.sigma_ext = Some(data.sigma_ext.entries().to_vec());
    doc.theta = Some(rows(&data.theta));
    doc.gamma = Some(rows(&data.gamma));
    doc.phi = Some(rows(&data.phi));
    doc.sigma_int_dagger = Some(data.sigma_int_dagger.entries().to_vec());
    doc.n_c = Some(data.n_c);
    doc.n_l = Some(data.n_l);
    doc.permutation = Some(data.permutation.clone());
    encode(&doc)
}

pub fn internal_from_json(text: &str) -> Result<(StructuredRealization, InternalData)> {
    let doc = decode(text)?;
    let real = doc.realization()?;
    let missing = |f: &str| Error::Structure(format!("internal data document lacks {f}"));
    let (si, se) = match (real.sigma_int(), real.sigma_ext()) {
        (Some(si), Some(se)) => (si.clone(), se.clone()),
        _ => return Err(missing("sigma_int / sigma_ext")),
    };
    let dagger = doc.sigma_int_dagger.as_ref().ok_or_else(|| missing("sigma_int_dagger"))?;
    let nd = dagger.len();
    let sigma_int_dagger = signature("sigma_int_dagger", dagger, nd)?;
    let n = real.n();
    let theta = matrix("theta", doc.theta.as_ref().ok_or_else(|| missing("theta"))?, nd, nd)?;
    let gamma = matrix("gamma", doc.gamma.as_ref().ok_or_else(|| missing("gamma"))?, n, nd)?;
    let phi = matrix("phi", doc.phi.as_ref().ok_or_else(|| missing("phi"))?, n, n)?;
    let permutation = doc.permutation.clone().ok_or_else(|| missing("permutation"))?;
    let total = nd + n + real.m();
    let mut seen = vec![false; total];
    if permutation.len() != total || permutation.iter().any(|&k| k >= total || std::mem::replace(&mut seen[k], true)) {
        return Err(Error::Structure(format!("permutation must be a permutation of 0..{total}")));
    }
    let data = InternalData {
        theta,
        gamma,
        phi,
        sigma_int_dagger,
        sigma_int: si,
        sigma_ext: se,
        permutation,
        n_c: doc.n_c.ok_or_else(|| missing("n_C"))?,
        n_l: doc.n_l.ok_or_else(|| missing("n_L"))?,
    };
    if data.n_c + data.n_l != nd + n {
        return Err(Error::Structure("n_C + n_L must equal the number of reactive elements".into()));
    }
    Ok((real, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::*;
    use crate::structured::build_lct;

    fn same(a: &Mat, b: &Mat) -> bool {
        a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        let r = StructuredRealization::new(from_rows(&[&[0.1]]), eye(1), eye(1), zeros(1, 1)).unwrap();
        let text = realization_to_json(&r).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
    }

    #[test]
    fn lct_round_trip_is_bit_exact() {
        let a12 = from_rows(&[&[1.0 / 3.0, -2.0f64.sqrt()]]);
        let b12 = from_rows(&[&[std::f64::consts::PI]]);
        let b21 = from_rows(&[&[0.7], &[-1e-300]]);
        let r = build_lct(&a12, &b12, &b21, None).unwrap();
        let back = realization_from_json(&realization_to_json(&r).unwrap()).unwrap();
        for (x, y) in [(r.a(), back.a()), (r.b(), back.b()), (r.c(), back.c()), (r.d(), back.d())] {
            assert!(same(x, y));
        }
        assert_eq!(back.class_tag(), r.class_tag());
        assert_eq!(back.partition(), r.partition());
        assert_eq!(back.sigma_int(), r.sigma_int());
    }

    #[test]
    fn bad_signature_is_rejected() {
        let r = StructuredRealization::new(from_rows(&[&[-1.0]]), eye(1), eye(1), zeros(1, 1)).unwrap();
        let text = realization_to_json(&r).unwrap().replace("\"class_tag\"", "\"sigma_int\": [1], \"sigma_ext\": [1], \"class_tag\"");
        assert!(realization_from_json(&text).is_err());
        let ok = realization_to_json(&r).unwrap().replace("\"class_tag\"", "\"sigma_int\": [1], \"sigma_ext\": [-1], \"class_tag\"");
        assert!(realization_from_json(&ok).unwrap().sigma_int().is_some());
    }

    #[test]
    fn controller_hint_round_trip() {
        let k = Controller::static_gain(eye(2)).with_hint(ImplHint::TerminateResistors { ohms: 2.0 });
        let text = controller_to_json(&k).unwrap();
        assert!(text.contains("terminate_resistors"));
        let back = controller_from_json(&text).unwrap();
        assert!(matches!(back.impl_hint, Some(ImplHint::TerminateResistors { ohms }) if ohms == 2.0));
        assert_eq!(back.n(), 0);
        let none = controller_from_json(&controller_to_json(&Controller::static_gain(eye(1))).unwrap()).unwrap();
        assert!(none.impl_hint.is_none());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let text = r#"{"n":1,"m":1,"p":1,"A":[[0]],"B":[[1,2]],"C":[[1]],"D":[[0]]}"#;
        assert!(matches!(realization_from_json(text), Err(Error::Dimension(_))));
        assert!(matches!(realization_from_json("{"), Err(Error::Serde(_))));
    }

    #[test]
    fn internal_data_round_trip() {
        let c = 0.5f64;
        let s = 1.0 / c.sqrt();
        let r = StructuredRealization::new(zeros(1, 1), from_rows(&[&[s]]), from_rows(&[&[s]]), zeros(1, 1))
            .unwrap()
            .with_signatures(Signature::new(vec![1]).unwrap(), Signature::new(vec![-1]).unwrap())
            .unwrap();
        let data = InternalData {
            theta: zeros(0, 0),
            gamma: zeros(1, 0),
            phi: from_rows(&[&[c]]),
            sigma_int_dagger: Signature::new(vec![]).unwrap(),
            sigma_int: Signature::new(vec![1]).unwrap(),
            sigma_ext: Signature::new(vec![-1]).unwrap(),
            permutation: vec![0, 1],
            n_c: 1,
            n_l: 0,
        };
        let text = internal_to_json(&r, &data).unwrap();
        assert!(text.contains("\"n_C\""));
        let (r2, d2) = internal_from_json(&text).unwrap();
        assert!(same(&d2.phi, &data.phi) && same(r2.b(), r.b()), "{text}");
        assert_eq!(d2.permutation, data.permutation);
        let broken = text.replace("\"n_C\": 1", "\"n_C\": 2");
        assert!(internal_from_json(&broken).is_err());
    }
}
