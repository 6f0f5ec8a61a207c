//! Exact integer geometry on Z².
//!
//! Frequencies are `i128` vectors and every dot product goes through checked
//! arithmetic, so a certification either holds exactly or reports overflow.
//! The family construction picks `l_n = a · rot90(m_n)` with the smallest
//! admissible multiplier `a`, where admissibility is decided by evaluating
//! every non-orthogonality constraint that involves the new vectors as an
//! integer polynomial in `a`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A frequency label `n = (x, y) ∈ Z²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i128; 2]", into = "[i128; 2]")]
pub struct LatticeVec {
    pub x: i128,
    pub y: i128,
}

impl From<[i128; 2]> for LatticeVec {
    fn from([x, y]: [i128; 2]) -> Self {
        LatticeVec { x, y }
    }
}

impl From<LatticeVec> for [i128; 2] {
    fn from(v: LatticeVec) -> Self {
        [v.x, v.y]
    }
}

impl fmt::Display for LatticeVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl LatticeVec {
    pub const ZERO: LatticeVec = LatticeVec { x: 0, y: 0 };

    pub const fn new(x: i128, y: i128) -> Self {
        LatticeVec { x, y }
    }

    pub fn is_zero(&self) -> bool {
        self.x == 0 && self.y == 0
    }

    pub fn checked_add(self, o: LatticeVec) -> Option<LatticeVec> {
        Some(LatticeVec::new(self.x.checked_add(o.x)?, self.y.checked_add(o.y)?))
    }

    pub fn checked_sub(self, o: LatticeVec) -> Option<LatticeVec> {
        Some(LatticeVec::new(self.x.checked_sub(o.x)?, self.y.checked_sub(o.y)?))
    }

    pub fn checked_neg(self) -> Option<LatticeVec> {
        Some(LatticeVec::new(self.x.checked_neg()?, self.y.checked_neg()?))
    }

    pub fn checked_scale(self, a: i128) -> Option<LatticeVec> {
        Some(LatticeVec::new(self.x.checked_mul(a)?, self.y.checked_mul(a)?))
    }

    pub fn checked_dot(self, o: LatticeVec) -> Option<i128> {
        self.x.checked_mul(o.x)?.checked_add(self.y.checked_mul(o.y)?)
    }

    pub fn dot(self, o: LatticeVec) -> Result<i128> {
        self.checked_dot(o)
            .ok_or_else(|| Error::overflow(format!("computing {self}·{o}")))
    }

    pub fn norm_sq(self) -> Result<i128> {
        self.dot(self)
    }

    /// Euclidean norm as a float (exact up to rounding of the square root).
    pub fn norm(self) -> f64 {
        let (x, y) = (self.x as f64, self.y as f64);
        x.hypot(y)
    }

    pub fn add(self, o: LatticeVec) -> Result<LatticeVec> {
        self.checked_add(o)
            .ok_or_else(|| Error::overflow(format!("computing {self} + {o}")))
    }

    pub fn sub(self, o: LatticeVec) -> Result<LatticeVec> {
        self.checked_sub(o)
            .ok_or_else(|| Error::overflow(format!("computing {self} - {o}")))
    }

    pub fn neg(self) -> Result<LatticeVec> {
        self.checked_neg()
            .ok_or_else(|| Error::overflow(format!("negating {self}")))
    }
}

/// Rotation by +π/2: `(x, y) ↦ (−y, x)`.
pub fn rotate90(v: LatticeVec) -> LatticeVec {
    LatticeVec::new(-v.y, v.x)
}

/// `ω⁺_{m,n} = |m|² + |m−n|² − |n|²`.
pub fn omega_plus(m: LatticeVec, n: LatticeVec) -> Result<i128> {
    let d = m.sub(n)?;
    let (a, b, c) = (m.norm_sq()?, d.norm_sq()?, n.norm_sq()?);
    a.checked_add(b)
        .and_then(|s| s.checked_sub(c))
        .ok_or_else(|| Error::overflow("evaluating omega+"))
}

/// `ω⁻_{m,n} = |m|² − |m−n|² − |n|²`.
pub fn omega_minus(m: LatticeVec, n: LatticeVec) -> Result<i128> {
    let d = m.sub(n)?;
    let (a, b, c) = (m.norm_sq()?, d.norm_sq()?, n.norm_sq()?);
    a.checked_sub(b)
        .and_then(|s| s.checked_sub(c))
        .ok_or_else(|| Error::overflow("evaluating omega-"))
}

/// `m ∈ Γ⁺_res(n)`: `m ⊥ (n − m)`.
pub fn resonant_plus(n: LatticeVec, m: LatticeVec) -> Result<bool> {
    Ok(m.dot(n.sub(m)?)? == 0)
}

/// `m ∈ Γ⁻_res(n)`: `n ⊥ (n − m)`.
pub fn resonant_minus(n: LatticeVec, m: LatticeVec) -> Result<bool> {
    Ok(n.dot(n.sub(m)?)? == 0)
}

/// `|b| > |a| + 1`, decided in integers.
///
/// With `X = |b|² − |a|² − 1` the condition reads `X > 2|a|`, and for integer
/// `X` that is `X > ⌊√(4|a|²)⌋`.
pub fn longer_by_more_than_one(a: LatticeVec, b: LatticeVec) -> Result<bool> {
    let (na, nb) = (a.norm_sq()?, b.norm_sq()?);
    let x = nb
        .checked_sub(na)
        .and_then(|v| v.checked_sub(1))
        .ok_or_else(|| Error::overflow("comparing lengths"))?;
    if x <= 0 {
        return Ok(false);
    }
    let four_na = na
        .checked_mul(4)
        .ok_or_else(|| Error::overflow("comparing lengths"))?;
    let s = (four_na as u128).isqrt() as i128;
    Ok(x > s)
}

/// The two sequences `(m_k)`, `(l_k)` with `m_{k+1} = m_k + l_k`.
///
/// `m` and `l` both hold indices `0..=K`; the next vector `m_{K+1}` is implied
/// and available through [`FrequencyFamily::m_at`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyFamily {
    pub m: Vec<LatticeVec>,
    pub l: Vec<LatticeVec>,
    pub a_choices: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct FamilyDocument {
    m: Vec<LatticeVec>,
    l: Vec<LatticeVec>,
    a_choices: Vec<u64>,
    #[serde(rename = "K")]
    k: usize,
}

impl FrequencyFamily {
    /// Largest stored index `K`.
    pub fn k_max(&self) -> usize {
        self.l.len().saturating_sub(1)
    }

    /// `m_k` for `k ≤ K + 1`.
    pub fn m_at(&self, k: usize) -> Result<LatticeVec> {
        if k < self.m.len() {
            Ok(self.m[k])
        } else if k == self.m.len() && k >= 1 && k - 1 < self.l.len() {
            self.m[k - 1].add(self.l[k - 1])
        } else {
            Err(Error::InvalidArgument(format!(
                "m_{k} is outside the family (K = {})",
                self.k_max()
            )))
        }
    }

    /// `m_k − l_k`.
    pub fn s_at(&self, k: usize) -> Result<LatticeVec> {
        self.m[k].sub(self.l[k])
    }

    /// `m_0, …, m_{K+1}`.
    pub fn m_extended(&self) -> Result<Vec<LatticeVec>> {
        (0..=self.m.len()).map(|k| self.m_at(k)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FamilyDocument {
            m: self.m.clone(),
            l: self.l.clone(),
            a_choices: self.a_choices.clone(),
            k: self.k_max(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FamilyDocument = serde_json::from_str(text)?;
        if doc.m.is_empty() || doc.m.len() != doc.l.len() || doc.k + 1 != doc.m.len() {
            return Err(Error::InvalidArgument(format!(
                "family document has {} m, {} l entries and K = {}",
                doc.m.len(),
                doc.l.len(),
                doc.k
            )));
        }
        Ok(FrequencyFamily {
            m: doc.m,
            l: doc.l,
            a_choices: doc.a_choices,
        })
    }
}

/// Knobs for [`construct_family_with`].
#[derive(Clone, Copy, Debug)]
pub struct FamilyOptions {
    /// The constant `C` of the search cap `a ≤ 10·C·(n+1)`.
    pub search_constant: u64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { search_constant: 4 }
    }
}

/// `c + a·d`, the shape of every vector touched at one induction step.
#[derive(Clone, Copy, Debug)]
struct Affine {
    c: LatticeVec,
    d: LatticeVec,
}

impl Affine {
    fn fixed(c: LatticeVec) -> Self {
        Affine { c, d: LatticeVec::ZERO }
    }

    fn add(self, o: Affine) -> Result<Affine> {
        Ok(Affine { c: self.c.add(o.c)?, d: self.d.add(o.d)? })
    }

    fn sub(self, o: Affine) -> Result<Affine> {
        Ok(Affine { c: self.c.sub(o.c)?, d: self.d.sub(o.d)? })
    }

    fn involves_multiplier(&self) -> bool {
        !self.d.is_zero()
    }

    /// Coefficients of `(self · o)(a) = q0 + q1 a + q2 a²`.
    fn dot(self, o: Affine) -> Result<[i128; 3]> {
        let q0 = self.c.dot(o.c)?;
        let q1 = self
            .c
            .dot(o.d)?
            .checked_add(self.d.dot(o.c)?)
            .ok_or_else(|| Error::overflow("forming constraint polynomial"))?;
        let q2 = self.d.dot(o.d)?;
        Ok([q0, q1, q2])
    }
}

fn eval_poly(q: &[i128; 3], a: i128) -> Option<i128> {
    q[2].checked_mul(a)?
        .checked_add(q[1])?
        .checked_mul(a)?
        .checked_add(q[0])
}

#[derive(Debug)]
struct Constraint {
    label: String,
    poly: [i128; 3],
}

/// Non-orthogonality constraints that involve `l_n` or `m_{n+1}` at step `n`.
fn step_constraints(ms: &[LatticeVec], ls: &[LatticeVec], w: LatticeVec) -> Result<Vec<Constraint>> {
    let n = ls.len();
    let m_of = |k: usize| -> Affine {
        if k == n + 1 {
            Affine { c: ms[n], d: w }
        } else {
            Affine::fixed(ms[k])
        }
    };
    let l_of = |k: usize| -> Affine {
        if k == n {
            Affine { c: LatticeVec::ZERO, d: w }
        } else {
            Affine::fixed(ls[k])
        }
    };

    let mut out = Vec::new();
    let mut push = |label: String, u: Affine, v: Affine| -> Result<()> {
        if u.involves_multiplier() || v.involves_multiplier() {
            out.push(Constraint { label, poly: u.dot(v)? });
        }
        Ok(())
    };

    for k in 0..=n + 1 {
        for kp in 0..=n {
            // P2 off-diagonal; the diagonal m_n·l_n vanishes by construction.
            if k != kp {
                push(format!("P2 m_{k}·l_{kp}"), m_of(k), l_of(kp))?;
            }
            push(format!("P4 m_{k}·(m_{kp}-l_{kp})"), m_of(k), m_of(kp).sub(l_of(kp))?)?;
        }
        for kp in 0..=n + 1 {
            if kp >= k {
                push(format!("P4 m_{k}·m_{kp}"), m_of(k), m_of(kp))?;
            }
        }
    }
    for k in 0..=n {
        for kp in 0..=n {
            push(format!("P5 (m_{k}-l_{k})·l_{kp}"), m_of(k).sub(l_of(k))?, l_of(kp))?;
            push(
                format!("P7 (m_{kp}-l_{kp}-l_{k})·l_{k}"),
                m_of(kp).sub(l_of(kp))?.sub(l_of(k))?,
                l_of(k),
            )?;
            if k != kp {
                push(
                    format!("P9 (l_{k}+m_{kp}-l_{kp})·l_{k}"),
                    l_of(k).add(m_of(kp))?.sub(l_of(kp))?,
                    l_of(k),
                )?;
            }
        }
        for kp in 0..=n + 1 {
            if kp != k + 1 {
                push(format!("P6 (m_{kp}-l_{k})·l_{k}"), m_of(kp).sub(l_of(k))?, l_of(k))?;
            }
            push(format!("P8 (l_{k}+m_{kp})·l_{k}"), l_of(k).add(m_of(kp))?, l_of(k))?;
        }
    }
    Ok(out)
}

/// Builds `(m_k, l_k)` for `k ≤ K` starting from `m0`, with default options.
pub fn construct_family(m0: LatticeVec, k_max: usize) -> Result<FrequencyFamily> {
    construct_family_with(m0, k_max, FamilyOptions::default())
}

/// Induction: `l_n = a·rot90(m_n)` with the smallest `a ≥ max(2, n+1)` that no
/// constraint excludes.
pub fn construct_family_with(
    m0: LatticeVec,
    k_max: usize,
    opts: FamilyOptions,
) -> Result<FrequencyFamily> {
    if m0.is_zero() {
        return Err(Error::InvalidArgument("m0 must be nonzero".into()));
    }
    let mut ms = vec![m0];
    let mut ls: Vec<LatticeVec> = Vec::new();
    let mut a_choices = Vec::new();

    for n in 0..=k_max {
        let ctx = |e: Error| match e {
            Error::Overflow { context } => Error::overflow(format!("{context} (constructing l_{n})")),
            other => other,
        };
        let w = rotate90(ms[n]);
        let constraints = step_constraints(&ms, &ls, w).map_err(ctx)?;
        if let Some(c) = constraints.iter().find(|c| c.poly == [0, 0, 0]) {
            return Err(Error::Infeasible { index: n, constraint: c.label.clone() });
        }
        // m_n · l_n must vanish identically.
        if ms[n].dot(w).map_err(ctx)? != 0 {
            return Err(Error::Infeasible { index: n, constraint: "P2 m_n·l_n = 0".into() });
        }

        let cap = 10 * opts.search_constant * (n as u64 + 1);
        let start = (n as u64 + 1).max(2);
        let mut chosen = None;
        for a in start..=cap {
            let ai = a as i128;
            let mut admissible = true;
            for c in &constraints {
                let v = eval_poly(&c.poly, ai)
                    .ok_or_else(|| Error::overflow(format!("evaluating {} at a = {a} (constructing l_{n})", c.label)))?;
                if v == 0 {
                    admissible = false;
                    break;
                }
            }
            if !admissible {
                continue;
            }
            let l_n = w
                .checked_scale(ai)
                .ok_or_else(|| Error::overflow(format!("scaling rot90(m_{n}) by {a}")))?;
            if n >= 1 && !longer_by_more_than_one(ls[n - 1], l_n).map_err(ctx)? {
                continue;
            }
            let m_next = ms[n].add(l_n).map_err(ctx)?;
            // Every later step squares these norms; fail here rather than mid-certification.
            m_next.norm_sq().map_err(ctx)?;
            l_n.norm_sq().map_err(ctx)?;
            chosen = Some((a, l_n, m_next));
            break;
        }
        let (a, l_n, m_next) = chosen.ok_or(Error::SearchExhausted { index: n, cap })?;
        a_choices.push(a);
        ls.push(l_n);
        if n < k_max {
            ms.push(m_next);
        }
    }
    Ok(FrequencyFamily { m: ms, l: ls, a_choices })
}

/// The certified properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
    P10,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::P1,
        Property::P2,
        Property::P3,
        Property::P4,
        Property::P5,
        Property::P6,
        Property::P7,
        Property::P8,
        Property::P9,
        Property::P10,
    ];
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    /// `(k, k')` as in the property statement.
    pub indices: (usize, usize),
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: Property,
    pub passed: bool,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub k_max: usize,
    pub checks: Vec<PropertyCheck>,
}

impl CertificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, p: Property) -> &PropertyCheck {
        self.checks
            .iter()
            .find(|c| c.property == p)
            .expect("every property is checked")
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for CertificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certification up to K = {}", self.k_max)?;
        for c in &self.checks {
            match &c.witness {
                None => writeln!(f, "  {:<4} PASS", c.property.to_string())?,
                Some(w) => writeln!(
                    f,
                    "  {:<4} FAIL at (k, k') = ({}, {}): {}",
                    c.property.to_string(),
                    w.indices.0,
                    w.indices.1,
                    w.detail
                )?,
            }
        }
        Ok(())
    }
}

struct Checker {
    first: Option<Witness>,
}

impl Checker {
    fn new() -> Self {
        Checker { first: None }
    }

    fn require(&mut self, ok: bool, k: usize, kp: usize, detail: impl FnOnce() -> String) {
        if !ok && self.first.is_none() {
            self.first = Some(Witness { indices: (k, kp), detail: detail() });
        }
    }

    fn finish(self, property: Property) -> PropertyCheck {
        PropertyCheck { property, passed: self.first.is_none(), witness: self.first }
    }
}

/// Checks P1–P10 by direct evaluation over `m_0..m_{K+1}` and `l_0..l_K`.
pub fn verify_properties(f: &FrequencyFamily) -> Result<CertificationReport> {
    if f.m.len() != f.l.len() || f.m.is_empty() {
        return Err(Error::InvalidArgument("family needs equally many m and l entries".into()));
    }
    let kk = f.k_max();
    let m = f.m_extended()?;
    let l = &f.l;
    let nm = m.len();
    let s: Vec<LatticeVec> = (0..=kk).map(|k| m[k].sub(l[k])).collect::<Result<_>>()?;
    let mut checks = Vec::with_capacity(10);

    let mut c = Checker::new();
    for (k, v) in m.iter().enumerate() {
        c.require(!v.is_zero(), k, k, || format!("m_{k} = 0"));
    }
    for (k, v) in l.iter().enumerate() {
        c.require(!v.is_zero(), k, k, || format!("l_{k} = 0"));
    }
    checks.push(c.finish(Property::P1));

    let mut c = Checker::new();
    for k in 0..nm {
        for kp in 0..=kk {
            let d = m[k].dot(l[kp])?;
            c.require((d == 0) == (k == kp), k, kp, || format!("m_{k}·l_{kp} = {d}"));
        }
    }
    checks.push(c.finish(Property::P2));

    let mut c = Checker::new();
    for k in 0..kk {
        let want = f.m[k].add(l[k])?;
        c.require(f.m[k + 1] == want, k, k + 1, || {
            format!("m_{} = {} but m_{k} + l_{k} = {want}", k + 1, f.m[k + 1])
        });
    }
    checks.push(c.finish(Property::P3));

    let mut c = Checker::new();
    for k in 0..nm {
        for kp in 0..nm {
            let d = m[k].dot(m[kp])?;
            c.require(d != 0, k, kp, || format!("m_{k}·m_{kp} = 0"));
        }
        for kp in 0..=kk {
            let d = m[k].dot(s[kp])?;
            c.require(d != 0, k, kp, || format!("m_{k}·(m_{kp}-l_{kp}) = 0"));
        }
    }
    checks.push(c.finish(Property::P4));

    let mut c = Checker::new();
    for k in 0..=kk {
        for kp in 0..=kk {
            let d = s[k].dot(l[kp])?;
            c.require(d != 0, k, kp, || format!("(m_{k}-l_{k})·l_{kp} = 0"));
        }
    }
    checks.push(c.finish(Property::P5));

    let mut c = Checker::new();
    for k in 0..=kk {
        for kp in 0..nm {
            if kp == k + 1 {
                continue;
            }
            let d = m[kp].sub(l[k])?.dot(l[k])?;
            c.require(d != 0, k, kp, || format!("(m_{kp}-l_{k})·l_{k} = 0"));
        }
    }
    checks.push(c.finish(Property::P6));

    let mut c = Checker::new();
    for k in 0..=kk {
        for kp in 0..=kk {
            let d = s[kp].sub(l[k])?.dot(l[k])?;
            c.require(d != 0, k, kp, || format!("(m_{kp}-l_{kp}-l_{k})·l_{k} = 0"));
        }
    }
    checks.push(c.finish(Property::P7));

    let mut c = Checker::new();
    for k in 0..=kk {
        for kp in 0..nm {
            let d = l[k].add(m[kp])?.dot(l[k])?;
            c.require(d != 0, k, kp, || format!("(l_{k}+m_{kp})·l_{k} = 0"));
        }
    }
    checks.push(c.finish(Property::P8));

    let mut c = Checker::new();
    for k in 0..=kk {
        for kp in 0..=kk {
            if k == kp {
                continue;
            }
            let d = l[k].add(s[kp])?.dot(l[k])?;
            c.require(d != 0, k, kp, || format!("(l_{k}+m_{kp}-l_{kp})·l_{k} = 0"));
        }
    }
    checks.push(c.finish(Property::P9));

    let mut c = Checker::new();
    for k in 0..kk {
        let ok = longer_by_more_than_one(l[k], l[k + 1])?;
        c.require(ok, k, k + 1, || {
            format!("|l_{}| = {:.6} is not > |l_{k}| + 1 = {:.6}", k + 1, l[k + 1].norm(), l[k].norm() + 1.0)
        });
    }
    checks.push(c.finish(Property::P10));

    Ok(CertificationReport { k_max: kk, checks })
}

/// A node of `Λ' ∪ Σ`: `p_k ↔ m_k`, `s_k ↔ m_k − l_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeLabel {
    P(usize),
    S(usize),
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeLabel::P(k) => write!(f, "p_{k}"),
            NodeLabel::S(k) => write!(f, "s_{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// One term `± a_source · r_drive` on the right-hand side of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interaction {
    pub sign: Sign,
    pub source: NodeLabel,
    pub drive: usize,
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "{s}{}·r_{}", self.source, self.drive)
    }
}

/// A resonant edge from a chain node to a frequency outside `Λ' ∪ Σ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutwardEdge {
    pub from: NodeLabel,
    pub to: LatticeVec,
    pub drive: usize,
    pub sign: Sign,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInteractions {
    pub node: NodeLabel,
    pub vector: LatticeVec,
    pub terms: Vec<Interaction>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionTable {
    pub k_max: usize,
    pub nodes: Vec<NodeInteractions>,
    pub outward: Vec<OutwardEdge>,
    /// Pairs of labels that name the same lattice point.
    pub collisions: Vec<(NodeLabel, NodeLabel)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub node: NodeLabel,
    pub missing: Vec<Interaction>,
    pub extra: Vec<Interaction>,
}

/// The chain pattern: `∂p_k = p_{k-1}r_{k-1} − p_{k+1}r_k − s_k r_k`,
/// `∂s_k = p_k r_k`, truncated at drive `K`.
pub fn chain_pattern(k_max: usize) -> Vec<(NodeLabel, Vec<Interaction>)> {
    let mut out = Vec::new();
    for k in 0..=k_max + 1 {
        let mut terms = Vec::new();
        if k >= 1 {
            terms.push(Interaction { sign: Sign::Plus, source: NodeLabel::P(k - 1), drive: k - 1 });
        }
        if k <= k_max {
            terms.push(Interaction { sign: Sign::Minus, source: NodeLabel::P(k + 1), drive: k });
            terms.push(Interaction { sign: Sign::Minus, source: NodeLabel::S(k), drive: k });
        }
        terms.sort();
        out.push((NodeLabel::P(k), terms));
    }
    for k in 0..=k_max {
        out.push((
            NodeLabel::S(k),
            vec![Interaction { sign: Sign::Plus, source: NodeLabel::P(k), drive: k }],
        ));
    }
    out
}

/// Brute-force resonant interactions among `Λ' ∪ Σ` with the potential on `±l_k`.
pub fn reduced_interactions(f: &FrequencyFamily) -> Result<InteractionTable> {
    let kk = f.k_max();
    let mut labelled: Vec<(NodeLabel, LatticeVec)> = Vec::new();
    for (k, v) in f.m_extended()?.into_iter().enumerate() {
        labelled.push((NodeLabel::P(k), v));
    }
    for k in 0..=kk {
        labelled.push((NodeLabel::S(k), f.s_at(k)?));
    }

    let mut index: HashMap<LatticeVec, NodeLabel> = HashMap::new();
    let mut collisions = Vec::new();
    for &(label, v) in &labelled {
        if let Some(&other) = index.get(&v) {
            collisions.push((other, label));
        } else {
            index.insert(v, label);
        }
    }

    let mut shifts = Vec::new();
    for (k, &lk) in f.l.iter().enumerate() {
        shifts.push((k, lk));
        shifts.push((k, lk.neg()?));
    }

    let mut nodes = Vec::new();
    let mut outward = Vec::new();
    for &(label, n) in &labelled {
        let mut terms = BTreeSet::new();
        for &(k, v) in &shifts {
            // m with n − m = v
            let m = n.sub(v)?;
            if let Some(&src) = index.get(&m) {
                if resonant_plus(n, m)? {
                    terms.insert(Interaction { sign: Sign::Plus, source: src, drive: k });
                }
                if resonant_minus(n, m)? {
                    terms.insert(Interaction { sign: Sign::Minus, source: src, drive: k });
                }
            }
            // target n + v outside the set, fed by n
            let target = n.add(v)?;
            if !index.contains_key(&target) {
                if resonant_plus(target, n)? {
                    outward.push(OutwardEdge { from: label, to: target, drive: k, sign: Sign::Plus });
                }
                if resonant_minus(target, n)? {
                    outward.push(OutwardEdge { from: label, to: target, drive: k, sign: Sign::Minus });
                }
            }
        }
        nodes.push(NodeInteractions { node: label, vector: n, terms: terms.into_iter().collect() });
    }
    Ok(InteractionTable { k_max: kk, nodes, outward, collisions })
}

impl InteractionTable {
    /// Differences against [`chain_pattern`]; empty for a certified family.
    pub fn discrepancies(&self) -> Vec<Discrepancy> {
        let expected: HashMap<NodeLabel, Vec<Interaction>> = chain_pattern(self.k_max).into_iter().collect();
        let mut out = Vec::new();
        for node in &self.nodes {
            let want: BTreeSet<Interaction> = expected.get(&node.node).cloned().unwrap_or_default().into_iter().collect();
            let got: BTreeSet<Interaction> = node.terms.iter().copied().collect();
            let missing: Vec<_> = want.difference(&got).copied().collect();
            let extra: Vec<_> = got.difference(&want).copied().collect();
            if !missing.is_empty() || !extra.is_empty() {
                out.push(Discrepancy { node: node.node, missing, extra });
            }
        }
        out
    }

    pub fn terms_of(&self, node: NodeLabel) -> Option<&[Interaction]> {
        self.nodes.iter().find(|n| n.node == node).map(|n| n.terms.as_slice())
    }

    /// No missing or extra chain terms, no resonant edge leaving the set, no
    /// coinciding labels.
    pub fn is_exact_chain(&self) -> bool {
        self.discrepancies().is_empty() && self.outward.is_empty() && self.collisions.is_empty()
    }
}
