//! Seeded random program generator for differential testing. Generated
//! programs are small, use narrow widths so the enumeration oracle stays
//! exact, and keep loops bounded so exploration terminates quickly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub n_vars: usize,
    pub width: u32,
    pub max_stmts: usize,
    pub max_depth: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_vars: 3,
            width: 4,
            max_stmts: 6,
            max_depth: 2,
        }
    }
}

const NAMES: [&str; 6] = ["x", "y", "z", "n", "a", "b"];

pub struct Gen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
}

impl Gen {
    pub fn new(seed: u64, cfg: GenConfig) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
        }
    }

    fn var(&mut self) -> &'static str {
        NAMES[self.rng.gen_range(0..self.cfg.n_vars)]
    }

    fn small_const(&mut self) -> u64 {
        self.rng.gen_range(0..1u64 << self.cfg.width.min(4))
    }

    fn cmp_op(&mut self) -> &'static str {
        ["==", "!=", "<", "<=", ">", ">="][self.rng.gen_range(0..6)]
    }

    fn expr(&mut self) -> String {
        match self.rng.gen_range(0..5) {
            0 => self.small_const().to_string(),
            1 => self.var().to_string(),
            2 => format!("{} + {}", self.var(), self.small_const()),
            3 => format!("{} - {}", self.var(), self.small_const()),
            _ => format!("{} + {}", self.var(), self.var()),
        }
    }

    fn cond(&mut self) -> String {
        let base = format!("{} {} {}", self.var(), self.cmp_op(), self.small_const());
        if self.rng.gen_bool(0.3) {
            format!(
                "{} && {} {} {}",
                base,
                self.var(),
                self.cmp_op(),
                self.var()
            )
        } else {
            base
        }
    }

    fn stmt(&mut self, depth: usize, out: &mut String, indent: usize) {
        let pad = "    ".repeat(indent);
        let choice = if depth >= self.cfg.max_depth {
            self.rng.gen_range(0..4)
        } else {
            self.rng.gen_range(0..6)
        };
        match choice {
            0 | 1 => {
                let v = self.var();
                let e = self.expr();
                out.push_str(&format!("{}{} := {};\n", pad, v, e));
            }
            2 => {
                let c = self.cond();
                out.push_str(&format!("{}assert({});\n", pad, c));
            }
            3 => {
                let c = self.cond();
                out.push_str(&format!("{}assume({});\n", pad, c));
            }
            4 => {
                let c = self.cond();
                out.push_str(&format!("{}if ({}) {{\n", pad, c));
                let n = self.rng.gen_range(1..3);
                for _ in 0..n {
                    self.stmt(depth + 1, out, indent + 1);
                }
                if self.rng.gen_bool(0.5) {
                    out.push_str(&format!("{}}} else {{\n", pad));
                    self.stmt(depth + 1, out, indent + 1);
                }
                out.push_str(&format!("{}}}\n", pad));
            }
            _ => {
                // Bounded counting loop: strictly increasing towards a
                // constant bound, so it terminates without wrapping.
                let v = self.var();
                let bound = self.rng.gen_range(1..1u64 << self.cfg.width.min(4));
                let step = self.rng.gen_range(1..4u64);
                out.push_str(&format!("{}while ({} < {}) {{\n", pad, v, bound));
                out.push_str(&format!("{}    {} := {} + {};\n", pad, v, v, step));
                if self.rng.gen_bool(0.4) {
                    self.stmt(depth + 1, out, indent + 1);
                }
                out.push_str(&format!("{}}}\n", pad));
            }
        }
    }

    /// Generate one program as source text.
    pub fn program(&mut self) -> String {
        let mut out = String::new();
        out.push_str(&format!("// WIDTH: {}\n", self.cfg.width));
        let names = &NAMES[..self.cfg.n_vars];
        let decls: Vec<String> = names
            .iter()
            .map(|n| match self.rng.gen_range(0..3) {
                0 => format!("{} := {}", n, self.small_const()),
                1 => format!("{} := *", n),
                _ => (*n).to_string(),
            })
            .collect();
        out.push_str(&format!("unsigned {};\n", decls.join(", ")));
        let n = self.rng.gen_range(1..=self.cfg.max_stmts);
        for _ in 0..n {
            self.stmt(0, &mut out, 0);
        }
        out
    }
}
