//! JSON encodings shared across modules: complex numbers are `[re, im]`
//! pairs and matrices are row-major arrays of such pairs.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair(pub [f64; 2]);

impl From<C64> for Pair {
    fn from(z: C64) -> Self {
        Pair([z.re, z.im])
    }
}

impl From<Pair> for C64 {
    fn from(p: Pair) -> Self {
        C64::new(p.0[0], p.0[1])
    }
}

pub fn pairs(v: &[C64]) -> Vec<Pair> {
    v.iter().map(|&z| z.into()).collect()
}

pub fn from_pairs(v: &[Pair]) -> Vec<C64> {
    v.iter().map(|&p| p.into()).collect()
}

pub fn matrix_rows(m: &CMat) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<Pair>]) -> crate::Result<CMat> {
    let n = rows.len();
    let k = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != k) {
        return Err(crate::Error::Format("ragged matrix".into()));
    }
    Ok(CMat::from_fn(n, k, |i, j| rows[i][j].into()))
}

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        Pair::from(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Pair::deserialize(d).map(Into::into)
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        pairs(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Vec::<Pair>::deserialize(d).map(|v| from_pairs(&v))
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        matrix_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<Pair>>::deserialize(d)?;
        matrix_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Pretty printer writing every float with 17 significant digits, so equal
/// values always print identically.
struct Digits17(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes a value as pretty JSON, floats with 17 significant digits.
/// Struct fields keep declaration order, so output is byte-stable.
pub fn to_string<T: Serialize>(value: &T) -> crate::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}
