//! Tseitin encoding of bit-vector formulas into CNF. Arithmetic uses
//! ripple-carry adders; every operation also yields a wrap literal that is
//! true iff the exact result left the word range, which is what the
//! overflow-flag semantics consume.

use super::{Cnf, Lit};
use crate::ir::{BExpr, Cfa, CmpOp, Expr, FlagRef};
use std::collections::HashMap;
use std::hash::Hash;

pub struct BitBlaster<V> {
    pub cnf: Cnf,
    width_of: Box<dyn Fn(&V) -> u32>,
    /// Width used for expressions that mention no variables.
    fallback_width: u32,
    vars: HashMap<V, Vec<Lit>>,
    flags: HashMap<FlagRef, Lit>,
    bools: HashMap<u32, Lit>,
    lit_true: Option<Lit>,
}

impl<V: Eq + Hash + Clone> BitBlaster<V> {
    pub fn new(width_of: impl Fn(&V) -> u32 + 'static, fallback_width: u32) -> Self {
        BitBlaster {
            cnf: Cnf::new(),
            width_of: Box::new(width_of),
            fallback_width,
            vars: HashMap::new(),
            flags: HashMap::new(),
            bools: HashMap::new(),
            lit_true: None,
        }
    }

    pub fn fresh(&mut self) -> Lit {
        Lit::pos(self.cnf.new_var())
    }

    pub fn true_lit(&mut self) -> Lit {
        if let Some(t) = self.lit_true {
            return t;
        }
        let t = self.fresh();
        self.cnf.add_clause(vec![t]);
        self.lit_true = Some(t);
        t
    }

    pub fn false_lit(&mut self) -> Lit {
        self.true_lit().negate()
    }

    /// Bits of a bit-vector variable, least significant first.
    pub fn var_bits(&mut self, v: &V) -> Vec<Lit> {
        if let Some(bits) = self.vars.get(v) {
            return bits.clone();
        }
        let w = (self.width_of)(v);
        let bits: Vec<Lit> = (0..w).map(|_| self.fresh()).collect();
        self.vars.insert(v.clone(), bits.clone());
        bits
    }

    pub fn flag_lit(&mut self, fl: FlagRef) -> Lit {
        if let Some(&l) = self.flags.get(&fl) {
            return l;
        }
        let l = self.fresh();
        self.flags.insert(fl, l);
        l
    }

    pub fn bool_lit(&mut self, id: u32) -> Lit {
        if let Some(&l) = self.bools.get(&id) {
            return l;
        }
        let l = self.fresh();
        self.bools.insert(id, l);
        l
    }

    pub fn known_var(&self, v: &V) -> Option<&Vec<Lit>> {
        self.vars.get(v)
    }

    /// Decode a variable's value from a model (missing variables are 0).
    pub fn decode(&self, v: &V, model: &[bool]) -> u64 {
        match self.vars.get(v) {
            None => 0,
            Some(bits) => bits
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, l)| {
                    let b = model[l.var().0 as usize] != l.is_neg();
                    acc | ((b as u64) << i)
                }),
        }
    }

    pub fn decode_flag(&self, fl: FlagRef, model: &[bool]) -> bool {
        match self.flags.get(&fl) {
            None => false,
            Some(l) => model[l.var().0 as usize] != l.is_neg(),
        }
    }

    pub fn decode_bool(&self, id: u32, model: &[bool]) -> bool {
        match self.bools.get(&id) {
            None => false,
            Some(l) => model[l.var().0 as usize] != l.is_neg(),
        }
    }

    // Gate encodings. Each returns a literal constrained to equal the gate
    // output.

    pub fn and2(&mut self, a: Lit, b: Lit) -> Lit {
        let o = self.fresh();
        self.cnf.add_clause(vec![o.negate(), a]);
        self.cnf.add_clause(vec![o.negate(), b]);
        self.cnf.add_clause(vec![o, a.negate(), b.negate()]);
        o
    }

    pub fn or2(&mut self, a: Lit, b: Lit) -> Lit {
        self.and2(a.negate(), b.negate()).negate()
    }

    pub fn xor2(&mut self, a: Lit, b: Lit) -> Lit {
        let o = self.fresh();
        self.cnf.add_clause(vec![o.negate(), a, b]);
        self.cnf.add_clause(vec![o.negate(), a.negate(), b.negate()]);
        self.cnf.add_clause(vec![o, a, b.negate()]);
        self.cnf.add_clause(vec![o, a.negate(), b]);
        o
    }

    pub fn iff2(&mut self, a: Lit, b: Lit) -> Lit {
        self.xor2(a, b).negate()
    }

    pub fn big_and(&mut self, lits: &[Lit]) -> Lit {
        match lits.len() {
            0 => self.true_lit(),
            1 => lits[0],
            _ => {
                let o = self.fresh();
                let mut long = vec![o];
                for &l in lits {
                    self.cnf.add_clause(vec![o.negate(), l]);
                    long.push(l.negate());
                }
                self.cnf.add_clause(long);
                o
            }
        }
    }

    pub fn big_or(&mut self, lits: &[Lit]) -> Lit {
        let neg: Vec<Lit> = lits.iter().map(|l| l.negate()).collect();
        self.big_and(&neg).negate()
    }

    fn full_add(&mut self, a: Lit, b: Lit, cin: Lit) -> (Lit, Lit) {
        let ab = self.xor2(a, b);
        let sum = self.xor2(ab, cin);
        let c1 = self.and2(a, b);
        let c2 = self.and2(ab, cin);
        let cout = self.or2(c1, c2);
        (sum, cout)
    }

    /// Ripple-carry addition; the returned carry is the wrap indicator.
    fn adder(&mut self, a: &[Lit], b: &[Lit]) -> (Vec<Lit>, Lit) {
        let mut carry = self.false_lit();
        let mut out = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let (s, c) = self.full_add(a[i], b[i], carry);
            out.push(s);
            carry = c;
        }
        (out, carry)
    }

    /// Two's-complement subtraction via borrow chain; the returned borrow is
    /// true iff `a < b`.
    fn subtractor(&mut self, a: &[Lit], b: &[Lit]) -> (Vec<Lit>, Lit) {
        let mut borrow = self.false_lit();
        let mut out = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let d0 = self.xor2(a[i], b[i]);
            let d = self.xor2(d0, borrow);
            // borrow' = (!a & b) | (!(a ^ b) & borrow)
            let t1 = self.and2(a[i].negate(), b[i]);
            let t2 = self.and2(d0.negate(), borrow);
            borrow = self.or2(t1, t2);
            out.push(d);
        }
        (out, borrow)
    }

    fn const_bits(&mut self, c: u64, w: u32) -> Vec<Lit> {
        let t = self.true_lit();
        let f = t.negate();
        let c = c & Cfa::mask(w);
        (0..w)
            .map(|i| if (c >> i) & 1 == 1 { t } else { f })
            .collect()
    }

    fn extend(&mut self, bits: Vec<Lit>, w: u32) -> Vec<Lit> {
        let mut bits = bits;
        let f = self.false_lit();
        while (bits.len() as u32) < w {
            bits.push(f);
        }
        debug_assert_eq!(bits.len() as u32, w);
        bits
    }

    pub fn expr_width(&self, e: &Expr<V>) -> u32 {
        let mut w = 0;
        e.for_each_var(&mut |v| w = w.max((self.width_of)(v)));
        if w == 0 {
            self.fallback_width
        } else {
            w
        }
    }

    /// Blast an expression at width `w`. Returns the result bits and a wrap
    /// literal covering every operation in the subtree.
    pub fn blast_expr(&mut self, e: &Expr<V>, w: u32) -> (Vec<Lit>, Lit) {
        match e {
            Expr::Var(v) => {
                let bits = self.var_bits(v);
                debug_assert!(bits.len() as u32 <= w);
                let bits = self.extend(bits, w);
                (bits, self.false_lit())
            }
            Expr::Const(c) => (self.const_bits(*c, w), self.false_lit()),
            Expr::Nondet => panic!("nondet must be lowered to havoc before encoding"),
            Expr::Add(a, b) => {
                let (xa, wa) = self.blast_expr(a, w);
                let (xb, wb) = self.blast_expr(b, w);
                let (sum, carry) = self.adder(&xa, &xb);
                (sum, self.big_or(&[wa, wb, carry]))
            }
            Expr::Sub(a, b) => {
                let (xa, wa) = self.blast_expr(a, w);
                let (xb, wb) = self.blast_expr(b, w);
                let (diff, borrow) = self.subtractor(&xa, &xb);
                (diff, self.big_or(&[wa, wb, borrow]))
            }
            Expr::Mul(a, b) => match (&**a, &**b) {
                // Constant factors use shift-and-add, which keeps the
                // encoding linear in the width instead of quadratic.
                (Expr::Const(c), e) | (e, Expr::Const(c)) => {
                    let (xe, we) = self.blast_expr(e, w);
                    let (prod, hi_wrap) = self.const_multiplier(&xe, *c);
                    (prod, self.big_or(&[we, hi_wrap]))
                }
                _ => {
                    let (xa, wa) = self.blast_expr(a, w);
                    let (xb, wb) = self.blast_expr(b, w);
                    let (prod, hi_wrap) = self.multiplier(&xa, &xb);
                    (prod, self.big_or(&[wa, wb, hi_wrap]))
                }
            },
        }
    }

    /// Schoolbook multiplier at double width; wrap is the OR of the high
    /// half of the product.
    fn multiplier(&mut self, a: &[Lit], b: &[Lit]) -> (Vec<Lit>, Lit) {
        let w = a.len();
        let f = self.false_lit();
        let mut acc: Vec<Lit> = vec![f; 2 * w];
        for i in 0..w {
            let mut row: Vec<Lit> = vec![f; 2 * w];
            for j in 0..w {
                if i + j < 2 * w {
                    row[i + j] = self.and2(a[i], b[j]);
                }
            }
            let (sum, _carry) = self.adder(&acc, &row);
            acc = sum;
        }
        let hi = self.big_or(&acc[w..]);
        (acc[..w].to_vec(), hi)
    }

    /// Multiplication by a constant at double width: one shifted addend per
    /// set bit of the factor. Wrap is the OR of the high half, as in the
    /// general multiplier.
    fn const_multiplier(&mut self, a: &[Lit], c: u64) -> (Vec<Lit>, Lit) {
        let w = a.len();
        let f = self.false_lit();
        let c = c & Cfa::mask(w as u32);
        let mut acc: Vec<Lit> = vec![f; 2 * w];
        for i in 0..w {
            if (c >> i) & 1 == 1 {
                let mut row: Vec<Lit> = vec![f; 2 * w];
                row[i..i + w].copy_from_slice(a);
                let (sum, _carry) = self.adder(&acc, &row);
                acc = sum;
            }
        }
        let hi = self.big_or(&acc[w..]);
        (acc[..w].to_vec(), hi)
    }

    pub fn blast_cmp(&mut self, op: CmpOp, a: &Expr<V>, b: &Expr<V>) -> Lit {
        let w = self.expr_width(a).max(self.expr_width(b));
        let (xa, _) = self.blast_expr(a, w);
        let (xb, _) = self.blast_expr(b, w);
        match op {
            CmpOp::Eq => {
                let eqs: Vec<Lit> = (0..xa.len()).map(|i| self.iff2(xa[i], xb[i])).collect();
                self.big_and(&eqs)
            }
            CmpOp::Ne => self.blast_cmp_bits(CmpOp::Eq, &xa, &xb).negate(),
            CmpOp::Lt => self.subtractor(&xa, &xb).1,
            CmpOp::Ge => self.subtractor(&xa, &xb).1.negate(),
            CmpOp::Gt => self.subtractor(&xb, &xa).1,
            CmpOp::Le => self.subtractor(&xb, &xa).1.negate(),
        }
    }

    fn blast_cmp_bits(&mut self, op: CmpOp, xa: &[Lit], xb: &[Lit]) -> Lit {
        match op {
            CmpOp::Eq => {
                let eqs: Vec<Lit> = (0..xa.len()).map(|i| self.iff2(xa[i], xb[i])).collect();
                self.big_and(&eqs)
            }
            _ => unreachable!(),
        }
    }

    /// Blast a boolean formula to a single literal.
    pub fn blast_bool(&mut self, b: &BExpr<V>) -> Lit {
        match b {
            BExpr::True => self.true_lit(),
            BExpr::False => self.false_lit(),
            BExpr::Cmp(op, a, e) => self.blast_cmp(*op, a, e),
            BExpr::And(xs) => {
                let lits: Vec<Lit> = xs.iter().map(|x| self.blast_bool(x)).collect();
                self.big_and(&lits)
            }
            BExpr::Or(xs) => {
                let lits: Vec<Lit> = xs.iter().map(|x| self.blast_bool(x)).collect();
                self.big_or(&lits)
            }
            BExpr::Not(x) => self.blast_bool(x).negate(),
            BExpr::Ovf(fl) => self.flag_lit(*fl),
            BExpr::Wraps(e) => {
                let w = self.expr_width(e);
                self.blast_expr(e, w).1
            }
            BExpr::BoolVar(i) => self.bool_lit(*i),
        }
    }

    /// Assert a formula at the top level.
    pub fn assert_true(&mut self, b: &BExpr<V>) {
        let l = self.blast_bool(b);
        self.cnf.add_clause(vec![l]);
    }
}
