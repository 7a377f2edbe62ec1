//! Formal sums of products of `ê_m` evaluated at integer-linear forms in
//! configuration variables `z_i` and parameters `w_j`, with holomorphic
//! residues, one-variable regularized integration, indicating graphs and the
//! chain/loop closed forms.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combinatorics::BellRing;
use crate::error::{Error, Result};
use crate::kronecker::{EkRoute, Kronecker};

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn parity_sign(m: u32) -> i64 {
    if m.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `sum_i a_i z_i + sum_j b_j w_j + c` with integer `a_i, b_j` and complex `c`.
///
/// Evaluation reads `z_i` from position `i` of the supplied slice, and
/// likewise for `w_j`, so index 0 is a valid (anchor) variable.
#[derive(Debug, Clone, Default)]
pub struct LinearForm {
    z: BTreeMap<usize, i64>,
    w: BTreeMap<usize, i64>,
    constant: Complex64,
}

impl LinearForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn z(i: usize) -> Self {
        Self::zero().with_z(i, 1)
    }

    pub fn w(j: usize) -> Self {
        Self::zero().with_w(j, 1)
    }

    pub fn constant(c: Complex64) -> Self {
        Self::zero().with_constant(c)
    }

    /// `z_k - z_l + w_k`, the arrangement form specialized to the parameters.
    pub fn s(k: usize, l: usize, w: usize) -> Self {
        Self::zero().with_z(k, 1).with_z(l, -1).with_w(w, 1)
    }

    pub fn with_z(mut self, i: usize, a: i64) -> Self {
        add_coeff(&mut self.z, i, a);
        self
    }

    pub fn with_w(mut self, j: usize, b: i64) -> Self {
        add_coeff(&mut self.w, j, b);
        self
    }

    pub fn with_constant(mut self, c: Complex64) -> Self {
        self.constant += c;
        self.constant = normalize_zero(self.constant);
        self
    }

    pub fn z_coeff(&self, i: usize) -> i64 {
        self.z.get(&i).copied().unwrap_or(0)
    }

    pub fn w_coeff(&self, j: usize) -> i64 {
        self.w.get(&j).copied().unwrap_or(0)
    }

    pub fn constant_term(&self) -> Complex64 {
        self.constant
    }

    pub fn z_terms(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.z.iter().map(|(i, a)| (*i, *a))
    }

    pub fn w_terms(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.w.iter().map(|(j, b)| (*j, *b))
    }

    pub fn is_z_free(&self) -> bool {
        self.z.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.z.is_empty() && self.w.is_empty() && self.constant == Complex64::new(0.0, 0.0)
    }

    pub fn neg(&self) -> Self {
        self.scale(-1)
    }

    pub fn scale(&self, k: i64) -> Self {
        let mut out = Self::zero();
        for (i, a) in &self.z {
            add_coeff(&mut out.z, *i, a * k);
        }
        for (j, b) in &self.w {
            add_coeff(&mut out.w, *j, b * k);
        }
        out.constant = normalize_zero(self.constant * k as f64);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (i, a) in &other.z {
            add_coeff(&mut out.z, *i, *a);
        }
        for (j, b) in &other.w {
            add_coeff(&mut out.w, *j, *b);
        }
        out.constant = normalize_zero(out.constant + other.constant);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Replaces `z_v` by `replacement`.
    pub fn substitute_z(&self, v: usize, replacement: &Self) -> Self {
        let a = self.z_coeff(v);
        if a == 0 {
            return self.clone();
        }
        let mut rest = self.clone();
        rest.z.remove(&v);
        rest.add(&replacement.scale(a))
    }

    /// Sign of the first nonzero coefficient, z-part first, then w, then the constant.
    fn leading_sign(&self) -> i8 {
        if let Some((_, a)) = self.z.iter().next() {
            return a.signum() as i8;
        }
        if let Some((_, b)) = self.w.iter().next() {
            return b.signum() as i8;
        }
        let c = self.constant;
        if c.re != 0.0 {
            return if c.re > 0.0 { 1 } else { -1 };
        }
        if c.im != 0.0 {
            return if c.im > 0.0 { 1 } else { -1 };
        }
        0
    }

    pub fn evaluate(&self, z_values: &[Complex64], w_values: &[Complex64]) -> Result<Complex64> {
        let mut v = self.constant;
        for (i, a) in &self.z {
            let zi = z_values.get(*i).ok_or_else(|| Error::Domain(format!("no value supplied for z{i}")))?;
            v += zi * *a as f64;
        }
        for (j, b) in &self.w {
            let wj = w_values.get(*j).ok_or_else(|| Error::Domain(format!("no value supplied for w{j}")))?;
            v += wj * *b as f64;
        }
        Ok(v)
    }
}

fn add_coeff(map: &mut BTreeMap<usize, i64>, i: usize, a: i64) {
    let v = map.get(&i).copied().unwrap_or(0) + a;
    if v == 0 {
        map.remove(&i);
    } else {
        map.insert(i, v);
    }
}

fn normalize_zero(c: Complex64) -> Complex64 {
    // -0.0 and 0.0 must compare equal for canonical ordering
    Complex64::new(if c.re == 0.0 { 0.0 } else { c.re }, if c.im == 0.0 { 0.0 } else { c.im })
}

impl PartialEq for LinearForm {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for LinearForm {}

impl PartialOrd for LinearForm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LinearForm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.z
            .cmp(&other.z)
            .then_with(|| self.w.cmp(&other.w))
            .then_with(|| self.constant.re.total_cmp(&other.constant.re))
            .then_with(|| self.constant.im.total_cmp(&other.constant.im))
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<(bool, String)> = Vec::new();
        let mut push = |coef: i64, name: String| {
            let mag = coef.unsigned_abs();
            let body = if mag == 1 { name } else { format!("{mag}*{name}") };
            parts.push((coef < 0, body));
        };
        for (i, a) in &self.z {
            push(*a, format!("z{i}"));
        }
        for (j, b) in &self.w {
            push(*b, format!("w{j}"));
        }
        if self.constant != Complex64::new(0.0, 0.0) || parts.is_empty() {
            parts.push((false, format!("c({},{})", self.constant.re, self.constant.im)));
        }
        for (k, (neg, body)) in parts.iter().enumerate() {
            match (k, neg) {
                (0, true) => write!(f, "-{body}")?,
                (0, false) => write!(f, "{body}")?,
                (_, true) => write!(f, " - {body}")?,
                (_, false) => write!(f, " + {body}")?,
            }
        }
        Ok(())
    }
}

/// One factor `ê_m(s)` or, in the holomorphic limit, `e_m(s)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Factor {
    pub m: u32,
    pub form: LinearForm,
    pub holomorphic: bool,
}

impl Factor {
    pub fn hat(m: u32, form: LinearForm) -> Self {
        Factor { m, form, holomorphic: false }
    }

    pub fn holo(m: u32, form: LinearForm) -> Self {
        Factor { m, form, holomorphic: true }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = if self.holomorphic { "e" } else { "eh" };
        write!(f, "{name}[{}]({})", self.m, self.form)
    }
}

/// `coefficient * prod factors`, canonical: no `m = 0` factors, z-free
/// arguments sign-normalized by parity, factors sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EKMonomial {
    pub coefficient: BigRational,
    factors: Vec<Factor>,
}

impl EKMonomial {
    pub fn new(coefficient: BigRational, factors: Vec<Factor>) -> Self {
        let mut coefficient = coefficient;
        let mut out = Vec::with_capacity(factors.len());
        for mut f in factors {
            if f.m == 0 {
                continue;
            }
            if f.form.is_z_free() && f.form.leading_sign() < 0 {
                f.form = f.form.neg();
                coefficient *= rat(parity_sign(f.m));
            }
            out.push(f);
        }
        out.sort();
        EKMonomial { coefficient, factors: out }
    }

    pub fn unit() -> Self {
        EKMonomial { coefficient: BigRational::one(), factors: Vec::new() }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// `sum m` over factors.
    pub fn weight(&self) -> u32 {
        self.factors.iter().map(|f| f.m).sum()
    }
}

/// A canonical sum of monomials with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EKExpr {
    terms: BTreeMap<Vec<Factor>, BigRational>,
}

impl EKExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_monomial(EKMonomial { coefficient: c, factors: Vec::new() })
    }

    pub fn from_monomial(m: EKMonomial) -> Self {
        let mut e = Self::zero();
        e.add_monomial(m);
        e
    }

    /// A single factor `ê_m(s)` with coefficient one.
    pub fn e_hat(m: u32, form: LinearForm) -> Self {
        Self::from_monomial(EKMonomial::new(BigRational::one(), vec![Factor::hat(m, form)]))
    }

    pub fn add_monomial(&mut self, m: EKMonomial) {
        if m.coefficient.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m.factors) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += m.coefficient;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(m.coefficient);
            }
        }
    }

    pub fn monomials(&self) -> impl Iterator<Item = EKMonomial> + '_ {
        self.terms.iter().map(|(f, c)| EKMonomial { coefficient: c.clone(), factors: f.clone() })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero();
        for m in self.monomials() {
            out.add_monomial(EKMonomial { coefficient: m.coefficient * c, factors: m.factors });
        }
        out
    }

    pub fn mul_expr(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for a in self.monomials() {
            for b in other.monomials() {
                let mut f = a.factors.clone();
                f.extend(b.factors.iter().cloned());
                out.add_monomial(EKMonomial::new(&a.coefficient * &b.coefficient, f));
            }
        }
        out
    }

    fn map_kind(&self, holomorphic: bool) -> Self {
        let mut out = Self::zero();
        for m in self.monomials() {
            let f = m.factors.into_iter().map(|f| Factor { holomorphic, ..f }).collect();
            out.add_monomial(EKMonomial::new(m.coefficient, f));
        }
        out
    }

    /// Every `ê_m` replaced by its holomorphic counterpart `e_m`.
    pub fn holomorphic_limit(&self) -> Self {
        self.map_kind(true)
    }

    /// Inverse of [`Self::holomorphic_limit`].
    pub fn elliptic_completion(&self) -> Self {
        self.map_kind(false)
    }

    /// Evaluates every factor through `kron`; `z_values[i]` is `z_i` and `w_values[j]` is `w_j`.
    pub fn numeric_eval(&self, z_values: &[Complex64], w_values: &[Complex64], kron: &Kronecker) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for (factors, c) in &self.terms {
            let mut v = Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0);
            for f in factors {
                let x = f.form.evaluate(z_values, w_values)?;
                let e = kron.ek_coeff(f.m as i64, x, !f.holomorphic, EkRoute::BellPolynomial).map_err(|e| match e {
                    Error::LatticePoint { .. } => Error::LatticePoint { what: format!("factor {f}"), at: x },
                    other => other,
                })?;
                v *= e;
            }
            total += v;
        }
        Ok(total)
    }
}

impl std::ops::Add for EKExpr {
    type Output = EKExpr;
    fn add(mut self, rhs: EKExpr) -> EKExpr {
        for m in rhs.monomials() {
            self.add_monomial(m);
        }
        self
    }
}

impl std::ops::Sub for EKExpr {
    type Output = EKExpr;
    fn sub(self, rhs: EKExpr) -> EKExpr {
        self + rhs.scale(&rat(-1))
    }
}

impl std::ops::Mul for EKExpr {
    type Output = EKExpr;
    fn mul(self, rhs: EKExpr) -> EKExpr {
        self.mul_expr(&rhs)
    }
}

impl Zero for EKExpr {
    fn zero() -> Self {
        EKExpr::zero()
    }
    fn is_zero(&self) -> bool {
        self.is_empty()
    }
}

impl One for EKExpr {
    fn one() -> Self {
        EKExpr::one()
    }
}

impl BellRing for EKExpr {
    fn from_count(n: u64) -> Self {
        EKExpr::constant(BigRational::from_integer(BigInt::from(n)))
    }
}

impl fmt::Display for EKExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (factors, c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            match (k, c.is_negative()) {
                (0, true) => write!(f, "-{mag}")?,
                (0, false) => write!(f, "{mag}")?,
                (_, true) => write!(f, " - {mag}")?,
                (_, false) => write!(f, " + {mag}")?,
            }
            for fac in factors {
                write!(f, " * {fac}")?;
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at byte {}", self.pos))
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn uint(&mut self) -> Result<u64> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("expected an unsigned integer"))
    }

    fn float(&mut self) -> Result<f64> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && !matches!(self.s[self.pos], b',' | b')') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| self.err("expected a float"))
    }

    fn rational(&mut self) -> Result<BigRational> {
        let n = self.uint()?;
        let d = if self.eat(b'/') { self.uint()? } else { 1 };
        if d == 0 {
            return Err(self.err("zero denominator"));
        }
        Ok(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    fn linear_form(&mut self) -> Result<LinearForm> {
        let mut form = LinearForm::zero();
        let mut first = true;
        loop {
            let sign: i64 = if self.eat(b'-') {
                -1
            } else if self.eat(b'+') || first {
                1
            } else {
                return Ok(form);
            };
            first = false;
            let mut k = 1i64;
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                k = self.uint()? as i64;
                self.expect(b'*')?;
            }
            match self.peek() {
                Some(b'z') => {
                    self.pos += 1;
                    let i = self.uint()? as usize;
                    form = form.with_z(i, sign * k);
                }
                Some(b'w') => {
                    self.pos += 1;
                    let j = self.uint()? as usize;
                    form = form.with_w(j, sign * k);
                }
                Some(b'c') => {
                    self.pos += 1;
                    self.expect(b'(')?;
                    let re = self.float()?;
                    self.expect(b',')?;
                    let im = self.float()?;
                    self.expect(b')')?;
                    form = form.with_constant(Complex64::new(re, im) * (sign * k) as f64);
                }
                _ => return Err(self.err("expected z, w or c(..)")),
            }
        }
    }

    fn factor(&mut self) -> Result<Factor> {
        let holomorphic = if self.eat(b'e') {
            !self.eat(b'h')
        } else {
            return Err(self.err("expected a factor e[m](..) or eh[m](..)"));
        };
        self.expect(b'[')?;
        let m = self.uint()? as u32;
        self.expect(b']')?;
        self.expect(b'(')?;
        let form = self.linear_form()?;
        self.expect(b')')?;
        Ok(Factor { m, form, holomorphic })
    }

    fn expr(&mut self) -> Result<EKExpr> {
        let mut out = EKExpr::zero();
        if self.peek() == Some(b'0') {
            let save = self.pos;
            self.pos += 1;
            if self.peek().is_none() {
                return Ok(out);
            }
            self.pos = save;
        }
        let mut first = true;
        while self.peek().is_some() {
            let sign = if self.eat(b'-') {
                -1
            } else if self.eat(b'+') || first {
                1
            } else {
                return Err(self.err("expected '+' or '-' between monomials"));
            };
            first = false;
            let coeff = self.rational()? * rat(sign);
            let mut factors = Vec::new();
            while self.eat(b'*') {
                factors.push(self.factor()?);
            }
            out.add_monomial(EKMonomial::new(coeff, factors));
        }
        Ok(out)
    }
}

impl FromStr for EKExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Parser { s: s.as_bytes(), pos: 0 }.expr()
    }
}

/// One end of an indicating-graph edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Endpoint {
    Vertex(usize),
    /// A variable held fixed (outside `1..=n`) or no variable at all.
    Anchor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
    pub m: u32,
    pub factor_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Trivial,
    /// A path, possibly ending at anchors.
    Chain,
    /// A consistently oriented cycle.
    Loop,
    /// Acyclic with a vertex of valency at least three.
    Tree,
    /// Contains a cycle but is not a directed loop.
    Cyclic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub kind: ComponentKind,
}

/// Directed multigraph of a monomial over the vertices `1..=n`.
#[derive(Debug, Clone)]
pub struct IndicatingGraph {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
    pub components: Vec<Component>,
}

impl IndicatingGraph {
    pub fn in_valency(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.to == Endpoint::Vertex(v)).count()
    }

    pub fn out_valency(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.from == Endpoint::Vertex(v)).count()
    }

    pub fn valency(&self, v: usize) -> usize {
        self.in_valency(v) + self.out_valency(v)
    }

    /// Every vertex has outer valency at most one.
    pub fn in_vd(&self) -> bool {
        (1..=self.vertex_count).all(|v| self.out_valency(v) <= 1)
    }

    pub fn has_leaf(&self) -> bool {
        (1..=self.vertex_count).any(|v| self.valency(v) == 1)
    }
}

/// Builds the indicating graph: a factor `ê_m(.. + z_k - z_l)` with `m >= 1`
/// is an edge `k -> l`; a factor with one variable from `1..=n` is an edge to
/// an anchor.
pub fn build_graph(f: &EKMonomial, n: usize) -> Result<IndicatingGraph> {
    let internal = |i: usize| (1..=n).contains(&i);
    let mut edges = Vec::new();
    for (idx, fac) in f.factors.iter().enumerate() {
        let vars: Vec<(usize, i64)> = fac.form.z_terms().filter(|(i, _)| internal(*i)).collect();
        if vars.iter().any(|(_, a)| a.abs() != 1) {
            return Err(Error::Unsupported(format!("not an arrangement form: {fac}")));
        }
        let (from, to) = match vars.as_slice() {
            [] => continue,
            [(i, a)] => {
                if *a > 0 {
                    (Endpoint::Vertex(*i), Endpoint::Anchor)
                } else {
                    (Endpoint::Anchor, Endpoint::Vertex(*i))
                }
            }
            [(i, a), (j, b)] if a * b < 0 => {
                if *a > 0 {
                    (Endpoint::Vertex(*i), Endpoint::Vertex(*j))
                } else {
                    (Endpoint::Vertex(*j), Endpoint::Vertex(*i))
                }
            }
            _ => return Err(Error::Unsupported(format!("not an arrangement form: {fac}"))),
        };
        edges.push(Edge { from, to, m: fac.m, factor_index: idx });
    }
    // union-find over internal vertices
    let mut parent: Vec<usize> = (0..=n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for e in &edges {
        if let (Endpoint::Vertex(a), Endpoint::Vertex(b)) = (e.from, e.to) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 1..=n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    let mut graph = IndicatingGraph { vertex_count: n, edges, components: Vec::new() };
    for (_, vertices) in groups {
        let vs: BTreeSet<usize> = vertices.iter().copied().collect();
        let touches = |p: Endpoint| matches!(p, Endpoint::Vertex(v) if vs.contains(&v));
        let edge_ids: Vec<usize> =
            graph.edges.iter().enumerate().filter(|(_, e)| touches(e.from) || touches(e.to)).map(|(k, _)| k).collect();
        let kind = classify(&graph, &vertices, &edge_ids);
        graph.components.push(Component { vertices, edges: edge_ids, kind });
    }
    Ok(graph)
}

fn classify(g: &IndicatingGraph, vertices: &[usize], edge_ids: &[usize]) -> ComponentKind {
    if edge_ids.is_empty() {
        return ComponentKind::Trivial;
    }
    let anchored = edge_ids.iter().any(|k| g.edges[*k].from == Endpoint::Anchor || g.edges[*k].to == Endpoint::Anchor);
    let max_val = vertices.iter().map(|v| g.valency(*v)).max().unwrap_or(0);
    // edges among internal vertices only; anchored edges never close a cycle
    let internal_edges = edge_ids.len()
        - edge_ids
            .iter()
            .filter(|k| {
                let e = &g.edges[**k];
                e.from == Endpoint::Anchor || e.to == Endpoint::Anchor
            })
            .count();
    let acyclic = internal_edges + 1 == vertices.len();
    if acyclic {
        return if max_val <= 2 { ComponentKind::Chain } else { ComponentKind::Tree };
    }
    let directed_cycle = !anchored
        && internal_edges == vertices.len()
        && vertices.iter().all(|v| g.in_valency(*v) == 1 && g.out_valency(*v) == 1);
    if directed_cycle {
        ComponentKind::Loop
    } else {
        ComponentKind::Cyclic
    }
}

fn sign_of(a: i64) -> BigRational {
    rat(a.signum())
}

/// Holomorphic residue in `z_v` of one monomial, summed over the poles whose
/// defining form is selected by `at` (all poles when `None`).
fn residue_monomial(m: &EKMonomial, v: usize, at: Option<&LinearForm>) -> Result<EKExpr> {
    let mut out = EKExpr::zero();
    for (idx, fac) in m.factors.iter().enumerate() {
        let sigma = fac.form.z_coeff(v);
        if sigma == 0 {
            continue;
        }
        if sigma.abs() != 1 {
            return Err(Error::Unsupported(format!("z{v} enters {fac} with coefficient {sigma}")));
        }
        if let Some(root) = at {
            if fac.form != *root && fac.form != root.neg() {
                continue;
            }
        }
        // z_v = -sigma * (s - sigma z_v) on the pole
        let rest = fac.form.substitute_z(v, &LinearForm::zero());
        let value = rest.scale(-sigma);
        let others: Vec<Factor> = m
            .factors
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != idx)
            .map(|(_, f)| Factor { form: f.form.substitute_z(v, &value), ..f.clone() })
            .collect();
        if others.iter().any(|f| f.form.is_zero()) {
            return Err(Error::Unsupported(format!("non-simple pole of {fac} in z{v}")));
        }
        if fac.m != 1 {
            continue;
        }
        out.add_monomial(EKMonomial::new(&m.coefficient * sign_of(sigma), others));
    }
    Ok(out)
}

/// Holomorphic residue in `z_v`; the poles are where some factor's form
/// vanishes, and `at` restricts to one of them.
pub fn symbolic_residue(f: &EKExpr, v: usize, at: Option<&LinearForm>) -> Result<EKExpr> {
    let mut out = EKExpr::zero();
    for m in f.monomials() {
        out = out + residue_monomial(&m, v, at)?;
    }
    Ok(out)
}

/// Residues taken in the listed variables, first to last.
pub fn iterated_residue(f: &EKExpr, order: &[usize]) -> Result<EKExpr> {
    order.iter().try_fold(f.clone(), |acc, v| symbolic_residue(&acc, *v, None))
}

fn integrate_monomial(m: &EKMonomial, v: usize) -> Result<EKExpr> {
    let (inv, rest): (Vec<Factor>, Vec<Factor>) = m.factors.iter().cloned().partition(|f| f.form.z_coeff(v) != 0);
    if inv.iter().any(|f| f.holomorphic) {
        return Err(Error::Unsupported("regularized integration of holomorphic-limit factors".into()));
    }
    if inv.iter().any(|f| f.form.z_coeff(v).abs() != 1) {
        return Err(Error::Unsupported(format!("z{v} enters with a coefficient other than +-1")));
    }
    match inv.as_slice() {
        [] => Ok(EKExpr::from_monomial(m.clone())),
        // a lone factor with m >= 1 integrates to zero
        [_] => Ok(EKExpr::zero()),
        [p, q] => {
            let mut coeff = m.coefficient.clone();
            let (mut s, mut t) = (p.clone(), q.clone());
            if s.form.z_coeff(v) == t.form.z_coeff(v) {
                t.form = t.form.neg();
                coeff *= rat(parity_sign(t.m));
            }
            if s.form.z_coeff(v) < 0 {
                std::mem::swap(&mut s, &mut t);
            }
            let sum = s.form.add(&t.form);
            if sum.is_zero() {
                return Err(Error::Unsupported("degenerate arrangement: combined form vanishes identically".into()));
            }
            // (delta_{m_t,0} - [m_s >= 1]) with both indices >= 1
            let mut factors = rest;
            factors.push(Factor::hat(s.m + t.m, sum));
            Ok(EKExpr::from_monomial(EKMonomial::new(-coeff, factors)))
        }
        _ => Err(Error::Unsupported(format!(
            "z{v} appears in {} factors; only two-factor reductions are supported",
            inv.len()
        ))),
    }
}

/// Regularized integral over `E_v` against the unit volume form.
pub fn symbolic_reg_integrate_one(f: &EKExpr, v: usize) -> Result<EKExpr> {
    let mut out = EKExpr::zero();
    for m in f.monomials() {
        out = out + integrate_monomial(&m, v)?;
    }
    Ok(out)
}

/// One-variable integrations applied in the listed order.
pub fn integrate_iterated(f: &EKExpr, order: &[usize]) -> Result<EKExpr> {
    order.iter().try_fold(f.clone(), |acc, v| symbolic_reg_integrate_one(&acc, *v))
}

fn integrate_all_monomial(m: &EKMonomial, n: usize) -> Result<EKExpr> {
    let g = build_graph(m, n)?;
    if g.has_leaf() {
        return Ok(EKExpr::zero());
    }
    if !g.in_vd() {
        return Err(Error::Unsupported(format!(
            "monomial outside the simple-pole space: {}",
            EKExpr::from_monomial(m.clone())
        )));
    }
    let in_edges: BTreeSet<usize> = g.edges.iter().map(|e| e.factor_index).collect();
    let passive: Vec<Factor> =
        m.factors.iter().enumerate().filter(|(k, _)| !in_edges.contains(k)).map(|(_, f)| f.clone()).collect();
    let mut result = EKExpr::from_monomial(EKMonomial::new(m.coefficient.clone(), passive));
    for comp in &g.components {
        let factors: Vec<Factor> = comp.edges.iter().map(|k| m.factors[g.edges[*k].factor_index].clone()).collect();
        let part = match comp.kind {
            ComponentKind::Trivial => continue,
            ComponentKind::Loop => {
                if factors.iter().any(|f| f.holomorphic) {
                    return Err(Error::Unsupported("regularized integration of holomorphic-limit factors".into()));
                }
                let size: u32 = factors.iter().map(|f| f.m).sum();
                let total = factors.iter().fold(LinearForm::zero(), |acc, f| acc.add(&f.form));
                // prod delta - prod(delta - 1) with every m_k >= 1
                let sign = if factors.len().is_multiple_of(2) { -1 } else { 1 };
                EKExpr::from_monomial(EKMonomial::new(rat(sign), vec![Factor::hat(size, total)]))
            }
            // leaves were excluded above, so what remains is anchored at both ends
            // or cyclic; reduce vertex by vertex
            _ => {
                let mono = EKExpr::from_monomial(EKMonomial::new(BigRational::one(), factors));
                let mut acc = mono;
                let mut remaining: Vec<usize> = comp.vertices.clone();
                while !remaining.is_empty() {
                    let pick = remaining.iter().position(|v| {
                        acc.monomials().all(|mm| mm.factors.iter().filter(|f| f.form.z_coeff(*v) != 0).count() <= 2)
                    });
                    let Some(p) = pick else {
                        return Err(Error::Unsupported("component outside the chain/loop/tree taxonomy".into()));
                    };
                    let v = remaining.remove(p);
                    acc = symbolic_reg_integrate_one(&acc, v)?;
                }
                acc
            }
        };
        result = result * part;
    }
    Ok(result)
}

/// Regularized integral over `E_1 x .. x E_n` by graph classification:
/// leaves give zero, directed loops give `(-1)^{n+1} ê_{|m|}(sum s)`, the
/// rest is reduced one variable at a time.
pub fn symbolic_reg_integrate_all(f: &EKExpr, n: usize) -> Result<EKExpr> {
    let mut out = EKExpr::zero();
    for m in f.monomials() {
        out = out + integrate_all_monomial(&m, n)?;
    }
    Ok(out)
}

/// `prod_{k<n} ê_{m_k}(z_k - z_{k+1} + w_k) * ê_{m_n}(z_n - z_0)`.
pub fn xi_chain(ms: &[u32]) -> EKExpr {
    let n = ms.len();
    let mut factors: Vec<Factor> = (1..n).map(|k| Factor::hat(ms[k - 1], LinearForm::s(k, k + 1, k))).collect();
    if n > 0 {
        factors.push(Factor::hat(ms[n - 1], LinearForm::z(n).with_z(0, -1)));
    }
    EKExpr::from_monomial(EKMonomial::new(BigRational::one(), factors))
}

/// `prod_k ê_{m_k}(z_k - z_{k+1} + w_k)` with `z_{n+1} = z_1`.
pub fn xi_loop(ms: &[u32]) -> EKExpr {
    let n = ms.len();
    let factors = (1..=n).map(|k| Factor::hat(ms[k - 1], LinearForm::s(k, k % n + 1, k))).collect();
    EKExpr::from_monomial(EKMonomial::new(BigRational::one(), factors))
}

/// `ê_{|m|}(sum_k w_k) * (prod delta_{m_k,0} - prod (delta_{m_k,0} - 1))`.
pub fn loop_closed_form(ms: &[u32]) -> EKExpr {
    let all_zero: i64 = ms.iter().map(|m| i64::from(*m == 0)).product();
    let shifted: i64 = ms.iter().map(|m| i64::from(*m == 0) - 1).product();
    let c = all_zero - shifted;
    let size: u32 = ms.iter().sum();
    let total = (1..=ms.len()).fold(LinearForm::zero(), |acc, k| acc.with_w(k, 1));
    EKExpr::from_monomial(EKMonomial::new(rat(c), vec![Factor::hat(size, total)]))
}

/// `prod_k delta_{m_k,0}`.
pub fn chain_closed_form(ms: &[u32]) -> EKExpr {
    if ms.iter().all(|m| *m == 0) {
        EKExpr::one()
    } else {
        EKExpr::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> EKExpr {
        s.parse().unwrap()
    }

    #[test]
    fn text_round_trip() {
        let e = parse("3/2 * eh[1](z1 - z2 + w1) * e[2](w1 + w2) - 1 * eh[3](z2 - z0 + c(0.1,-0.25))");
        let s = e.to_string();
        assert_eq!(s.parse::<EKExpr>().unwrap(), e);
        assert_eq!(parse(&s).to_string(), s);
        assert_eq!(parse("0"), EKExpr::zero());
        assert_eq!(parse("1"), EKExpr::one());
    }

    #[test]
    fn z_free_arguments_normalize_by_parity() {
        assert_eq!(parse("1 * eh[3](-w1 - w2)"), parse("-1 * eh[3](w1 + w2)"));
        assert_eq!(parse("1 * eh[2](-w1)"), parse("1 * eh[2](w1)"));
    }

    #[test]
    fn graph_shapes() {
        let lp = xi_loop(&[1, 1, 1]).monomials().next().unwrap();
        let g = build_graph(&lp, 3).unwrap();
        assert_eq!(g.components.len(), 1);
        assert_eq!(g.components[0].kind, ComponentKind::Loop);
        let one_edge = parse("1 * eh[2](z1 - z2 + w1)").monomials().next().unwrap();
        let g = build_graph(&one_edge, 3).unwrap();
        assert_eq!(g.components.len(), 2);
        assert_eq!(g.components[1].kind, ComponentKind::Trivial);
        let fan = parse("1 * eh[1](z1 - z2 + w1) * eh[1](z1 - z3 + w2)").monomials().next().unwrap();
        let g = build_graph(&fan, 3).unwrap();
        assert_eq!(g.out_valency(1), 2);
        assert!(!g.in_vd());
        let bad = parse("1 * eh[1](z1 + z2 - z3)").monomials().next().unwrap();
        assert!(build_graph(&bad, 3).is_err());
    }

    #[test]
    fn residues_of_single_factors() {
        assert_eq!(symbolic_residue(&parse("1 * eh[1](z1 - z0)"), 1, None).unwrap(), EKExpr::one());
        assert_eq!(symbolic_residue(&parse("1 * eh[2](z1 - z2 + w1)"), 1, None).unwrap(), EKExpr::zero());
        let two = parse("1 * eh[1](z1 - z2 + w1) * eh[3](z2 - z1 + w2)");
        let r = symbolic_residue(&two, 1, None).unwrap();
        assert_eq!(r, parse("1 * eh[3](w1 + w2)"));
    }

    #[test]
    fn chain_and_loop_residues() {
        for ms in [[1u32, 1, 1], [1, 2, 1], [2, 1, 1]] {
            let r = iterated_residue(&xi_chain(&ms), &[1, 2, 3]).unwrap();
            let expect = if ms.iter().all(|m| *m == 1) { EKExpr::one() } else { EKExpr::zero() };
            assert_eq!(r, expect);
        }
        for n in 2..=6 {
            let ms = vec![1u32; n];
            let order: Vec<usize> = (1..=n).collect();
            assert_eq!(iterated_residue(&xi_loop(&ms), &order).unwrap(), EKExpr::zero());
        }
    }

    #[test]
    fn loop_integrals() {
        let r = symbolic_reg_integrate_all(&xi_loop(&[1, 1]), 2).unwrap();
        assert_eq!(r, parse("-1 * eh[2](w1 + w2)"));
        let r = symbolic_reg_integrate_all(&xi_loop(&[1, 1, 1]), 3).unwrap();
        assert_eq!(r, parse("1 * eh[3](w1 + w2 + w3)"));
        for ms in [vec![2u32, 1], vec![1, 0, 2], vec![0, 0, 0], vec![2, 1, 1, 1]] {
            let all = symbolic_reg_integrate_all(&xi_loop(&ms), ms.len()).unwrap();
            let order: Vec<usize> = (1..=ms.len()).collect();
            assert_eq!(all, loop_closed_form(&ms), "{ms:?}");
            assert_eq!(integrate_iterated(&xi_loop(&ms), &order).unwrap(), all, "{ms:?}");
        }
        assert_eq!(symbolic_reg_integrate_all(&xi_chain(&[1, 2]), 2).unwrap(), EKExpr::zero());
    }

    #[test]
    fn one_variable_rule() {
        let f = parse("1 * eh[1](z1 - z2 + w1) * eh[1](z2 - z1 + w2)");
        assert_eq!(symbolic_reg_integrate_one(&f, 1).unwrap(), parse("-1 * eh[2](w1 + w2)"));
        assert_eq!(symbolic_reg_integrate_one(&parse("1 * eh[3](z1 - z0)"), 1).unwrap(), EKExpr::zero());
    }

    #[test]
    fn holomorphic_limit_round_trip() {
        let f = parse("2 * eh[1](z1 - z2 + w1) * eh[2](w1)");
        let h = f.holomorphic_limit();
        assert_eq!(h.to_string(), "2 * e[1](z1 - z2 + w1) * e[2](w1)");
        assert_eq!(h.elliptic_completion(), f);
    }
}
