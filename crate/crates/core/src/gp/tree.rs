//! Expression trees over the option terminals C/K, S/K and tau.
//!
//! Every operator is protected so that evaluation is total: any tree applied
//! to any valid case yields a finite number. Division by exactly zero yields
//! one, the logarithm takes the absolute value (zero maps to zero), the
//! square root takes the absolute value, and the exponential clamps its
//! argument to [-700, 700]. Clamping the exponential alone does not make
//! composition safe (the product of two clamped exponentials overflows), so
//! every operator output is additionally capped into
//! `[-VALUE_CAP, VALUE_CAP]`.

use rand::Rng;
use thiserror::Error;

use crate::option_math::norm_cdf;
use crate::pipeline::FitnessCase;

/// Magnitude cap applied to every operator output.
pub const VALUE_CAP: f64 = 1e300;

/// Largest exponential argument admitted before clamping.
pub const EXP_ARG_CAP: f64 = 700.0;

#[inline]
fn cap(v: f64) -> f64 {
    v.clamp(-VALUE_CAP, VALUE_CAP)
}

#[inline]
pub fn p_add(a: f64, b: f64) -> f64 {
    cap(a + b)
}

#[inline]
pub fn p_sub(a: f64, b: f64) -> f64 {
    cap(a - b)
}

#[inline]
pub fn p_mul(a: f64, b: f64) -> f64 {
    cap(a * b)
}

/// Protected division: exactly-zero denominators yield one.
#[inline]
pub fn p_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else {
        cap(a / b)
    }
}

#[inline]
pub fn p_cos(x: f64) -> f64 {
    cap(x.cos())
}

#[inline]
pub fn p_sin(x: f64) -> f64 {
    cap(x.sin())
}

/// Protected logarithm: `ln |x|`, with zero mapping to zero.
#[inline]
pub fn p_ln(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        cap(x.abs().ln())
    }
}

/// Exponential with the argument clamped to `[-EXP_ARG_CAP, EXP_ARG_CAP]`.
#[inline]
pub fn p_exp(x: f64) -> f64 {
    cap(x.clamp(-EXP_ARG_CAP, EXP_ARG_CAP).exp())
}

/// Protected square root: `sqrt |x|`.
#[inline]
pub fn p_sqrt(x: f64) -> f64 {
    cap(x.abs().sqrt())
}

#[inline]
pub fn p_ncdf(x: f64) -> f64 {
    cap(norm_cdf(x))
}

/// Leaf symbols: the three observables a model may read from a case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    /// Call price over strike.
    CK,
    /// Spot over strike.
    SK,
    /// Time to maturity in years.
    Tau,
}

pub const TERMINALS: [Terminal; 3] = [Terminal::CK, Terminal::SK, Terminal::Tau];

impl Terminal {
    pub fn symbol(self) -> &'static str {
        match self {
            Terminal::CK => "ck",
            Terminal::SK => "sk",
            Terminal::Tau => "tau",
        }
    }

    #[inline]
    pub fn value(self, case: &FitnessCase) -> f64 {
        match self {
            Terminal::CK => case.c_over_k,
            Terminal::SK => case.s_over_k,
            Terminal::Tau => case.tau,
        }
    }
}

/// Internal node symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Add,
    Sub,
    Mul,
    PDiv,
    Cos,
    Sin,
    PLn,
    Exp,
    PSqrt,
    NCdf,
}

pub const FUNCTIONS: [Func; 10] = [
    Func::Add,
    Func::Sub,
    Func::Mul,
    Func::PDiv,
    Func::Cos,
    Func::Sin,
    Func::PLn,
    Func::Exp,
    Func::PSqrt,
    Func::NCdf,
];

impl Func {
    pub fn arity(self) -> usize {
        match self {
            Func::Add | Func::Sub | Func::Mul | Func::PDiv => 2,
            _ => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Func::Add => "add",
            Func::Sub => "sub",
            Func::Mul => "mul",
            Func::PDiv => "pdiv",
            Func::Cos => "cos",
            Func::Sin => "sin",
            Func::PLn => "pln",
            Func::Exp => "exp",
            Func::PSqrt => "psqrt",
            Func::NCdf => "ncdf",
        }
    }

    #[inline]
    fn apply1(self, x: f64) -> f64 {
        match self {
            Func::Cos => p_cos(x),
            Func::Sin => p_sin(x),
            Func::PLn => p_ln(x),
            Func::Exp => p_exp(x),
            Func::PSqrt => p_sqrt(x),
            Func::NCdf => p_ncdf(x),
            _ => unreachable!("binary function applied to one argument"),
        }
    }

    #[inline]
    fn apply2(self, a: f64, b: f64) -> f64 {
        match self {
            Func::Add => p_add(a, b),
            Func::Sub => p_sub(a, b),
            Func::Mul => p_mul(a, b),
            Func::PDiv => p_div(a, b),
            _ => unreachable!("unary function applied to two arguments"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Term(Terminal),
    Op(Func, Vec<Node>),
}

impl Node {
    /// Depth of the subtree; a single node has depth zero.
    pub fn depth(&self) -> usize {
        match self {
            Node::Term(_) => 0,
            Node::Op(_, children) => 1 + children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            Node::Term(_) => 1,
            Node::Op(_, children) => 1 + children.iter().map(Node::count).sum::<usize>(),
        }
    }
}

fn subtree_at<'a>(node: &'a Node, target: usize, counter: &mut usize) -> Option<&'a Node> {
    if *counter == target {
        return Some(node);
    }
    *counter += 1;
    if let Node::Op(_, children) = node {
        for child in children {
            if let Some(found) = subtree_at(child, target, counter) {
                return Some(found);
            }
        }
    }
    None
}

fn replace_at(node: &Node, target: usize, replacement: &Node, counter: &mut usize) -> Node {
    if *counter == target {
        *counter += 1;
        return replacement.clone();
    }
    *counter += 1;
    match node {
        Node::Term(t) => Node::Term(*t),
        Node::Op(f, children) => Node::Op(
            *f,
            children
                .iter()
                .map(|c| replace_at(c, target, replacement, counter))
                .collect(),
        ),
    }
}

fn depth_of_index(node: &Node, target: usize, depth: usize, counter: &mut usize) -> Option<usize> {
    if *counter == target {
        return Some(depth);
    }
    *counter += 1;
    if let Node::Op(_, children) = node {
        for child in children {
            if let Some(d) = depth_of_index(child, target, depth + 1, counter) {
                return Some(d);
            }
        }
    }
    None
}

fn collect_indices(node: &Node, depth: usize, counter: &mut usize, out: &mut Vec<usize>, pred: &dyn Fn(&Node, usize, usize) -> bool) {
    let index = *counter;
    *counter += 1;
    if pred(node, index, depth) {
        out.push(index);
    }
    if let Node::Op(_, children) = node {
        for child in children {
            collect_indices(child, depth + 1, counter, out, pred);
        }
    }
}

/// A complete model candidate. Nodes are addressed by preorder index with
/// the root at index zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    root: Node,
}

impl ExprTree {
    pub fn new(root: Node) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    /// Evaluates the tree on one case. Total: the result is always finite.
    pub fn eval(&self, case: &FitnessCase) -> f64 {
        fn eval_node(node: &Node, case: &FitnessCase) -> f64 {
            match node {
                Node::Term(t) => t.value(case),
                Node::Op(f, children) => {
                    if f.arity() == 1 {
                        f.apply1(eval_node(&children[0], case))
                    } else {
                        f.apply2(eval_node(&children[0], case), eval_node(&children[1], case))
                    }
                }
            }
        }
        let v = eval_node(&self.root, case);
        debug_assert!(v.is_finite(), "evaluation produced {v}");
        v
    }

    /// Flattens the tree into a postfix program for the stack evaluator.
    pub fn compile(&self) -> CompiledExpr {
        fn emit(node: &Node, code: &mut Vec<OpStep>) {
            match node {
                Node::Term(t) => code.push(OpStep::Push(*t)),
                Node::Op(f, children) => {
                    for child in children {
                        emit(child, code);
                    }
                    code.push(OpStep::Apply(*f));
                }
            }
        }
        let mut code = Vec::with_capacity(self.node_count());
        emit(&self.root, &mut code);
        CompiledExpr { code, stack_need: self.depth() + 1 }
    }

    pub fn subtree(&self, index: usize) -> &Node {
        let mut counter = 0;
        subtree_at(&self.root, index, &mut counter).expect("node index out of range")
    }

    /// Returns a new tree with the subtree at `index` replaced.
    pub fn replaced(&self, index: usize, replacement: &Node) -> ExprTree {
        assert!(index < self.node_count(), "node index out of range");
        let mut counter = 0;
        ExprTree::new(replace_at(&self.root, index, replacement, &mut counter))
    }

    /// Depth at which the node with the given preorder index sits.
    pub fn node_depth(&self, index: usize) -> usize {
        let mut counter = 0;
        depth_of_index(&self.root, index, 0, &mut counter).expect("node index out of range")
    }

    /// Preorder indices of function nodes other than the root: the eligible
    /// crossover points.
    pub fn function_indices_excluding_root(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut counter = 0;
        collect_indices(&self.root, 0, &mut counter, &mut out, &|node, index, _| {
            index != 0 && matches!(node, Node::Op(..))
        });
        out
    }

    /// Preorder indices of every terminal position.
    pub fn terminal_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut counter = 0;
        collect_indices(&self.root, 0, &mut counter, &mut out, &|node, _, _| {
            matches!(node, Node::Term(_))
        });
        out
    }

    /// Serializes to parenthesized prefix notation, e.g.
    /// `(add ck (pdiv sk tau))`.
    pub fn to_prefix(&self) -> String {
        fn write(node: &Node, out: &mut String) {
            match node {
                Node::Term(t) => out.push_str(t.symbol()),
                Node::Op(f, children) => {
                    out.push('(');
                    out.push_str(f.symbol());
                    for child in children {
                        out.push(' ');
                        write(child, out);
                    }
                    out.push(')');
                }
            }
        }
        let mut out = String::new();
        write(&self.root, &mut out);
        out
    }

    /// Parses the prefix notation produced by [`ExprTree::to_prefix`].
    pub fn parse_prefix(input: &str) -> Result<Self, ExprParseError> {
        let mut tokens = Vec::new();
        let mut word = String::new();
        for ch in input.chars() {
            match ch {
                '(' | ')' => {
                    if !word.is_empty() {
                        tokens.push(std::mem::take(&mut word));
                    }
                    tokens.push(ch.to_string());
                }
                c if c.is_whitespace() => {
                    if !word.is_empty() {
                        tokens.push(std::mem::take(&mut word));
                    }
                }
                c => word.push(c),
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }

        let mut pos = 0;
        let root = parse_node(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(ExprParseError::TrailingInput(tokens[pos].clone()));
        }
        Ok(ExprTree::new(root))
    }

    /// Random tree from the grow method: below the depth budget each node is
    /// drawn uniformly from terminals and functions; at the budget only
    /// terminals remain.
    pub fn grow<R: Rng>(rng: &mut R, depth_budget: usize) -> Self {
        ExprTree::new(grow_node(rng, depth_budget))
    }

    /// Random tree from the full method: function nodes down to exactly the
    /// target depth, terminals there.
    pub fn full<R: Rng>(rng: &mut R, depth: usize) -> Self {
        ExprTree::new(full_node(rng, depth))
    }
}

pub fn grow_node<R: Rng>(rng: &mut R, depth_budget: usize) -> Node {
    if depth_budget == 0 {
        return Node::Term(TERMINALS[rng.random_range(0..TERMINALS.len())]);
    }
    let pick = rng.random_range(0..TERMINALS.len() + FUNCTIONS.len());
    if pick < TERMINALS.len() {
        Node::Term(TERMINALS[pick])
    } else {
        let f = FUNCTIONS[pick - TERMINALS.len()];
        let children = (0..f.arity()).map(|_| grow_node(rng, depth_budget - 1)).collect();
        Node::Op(f, children)
    }
}

pub fn full_node<R: Rng>(rng: &mut R, depth: usize) -> Node {
    if depth == 0 {
        return Node::Term(TERMINALS[rng.random_range(0..TERMINALS.len())]);
    }
    let f = FUNCTIONS[rng.random_range(0..FUNCTIONS.len())];
    let children = (0..f.arity()).map(|_| full_node(rng, depth - 1)).collect();
    Node::Op(f, children)
}

fn parse_node(tokens: &[String], pos: &mut usize) -> Result<Node, ExprParseError> {
    let token = tokens.get(*pos).ok_or(ExprParseError::UnexpectedEnd)?;
    if token == "(" {
        *pos += 1;
        let sym = tokens.get(*pos).ok_or(ExprParseError::UnexpectedEnd)?;
        let func = FUNCTIONS
            .iter()
            .find(|f| f.symbol() == sym)
            .copied()
            .ok_or_else(|| ExprParseError::NotAFunction(sym.clone()))?;
        *pos += 1;
        let mut children = Vec::with_capacity(func.arity());
        for _ in 0..func.arity() {
            children.push(parse_node(tokens, pos)?);
        }
        let closing = tokens.get(*pos).ok_or(ExprParseError::UnexpectedEnd)?;
        if closing != ")" {
            return Err(ExprParseError::ArityMismatch(func.symbol().to_string()));
        }
        *pos += 1;
        Ok(Node::Op(func, children))
    } else if token == ")" {
        Err(ExprParseError::UnexpectedToken(")".to_string()))
    } else {
        let term = TERMINALS
            .iter()
            .find(|t| t.symbol() == token.as_str())
            .copied()
            .ok_or_else(|| ExprParseError::UnknownSymbol(token.clone()))?;
        *pos += 1;
        Ok(Node::Term(term))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExprParseError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{0}` cannot head a parenthesized application")]
    NotAFunction(String),
    #[error("wrong number of arguments for `{0}`")]
    ArityMismatch(String),
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("input ended mid-expression")]
    UnexpectedEnd,
    #[error("trailing input starting at `{0}`")]
    TrailingInput(String),
}

/// Postfix program produced by [`ExprTree::compile`]. Operand order matches
/// the recursive evaluator exactly, so both produce bit-identical results.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    code: Vec<OpStep>,
    stack_need: usize,
}

#[derive(Debug, Clone, Copy)]
enum OpStep {
    Push(Terminal),
    Apply(Func),
}

impl CompiledExpr {
    /// Evaluates with a caller-provided stack so hot loops avoid
    /// re-allocating per case.
    pub fn eval_with(&self, case: &FitnessCase, stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        stack.reserve(self.stack_need);
        for step in &self.code {
            match step {
                OpStep::Push(t) => stack.push(t.value(case)),
                OpStep::Apply(f) => {
                    if f.arity() == 1 {
                        let x = stack.pop().expect("stack underflow");
                        stack.push(f.apply1(x));
                    } else {
                        let b = stack.pop().expect("stack underflow");
                        let a = stack.pop().expect("stack underflow");
                        stack.push(f.apply2(a, b));
                    }
                }
            }
        }
        debug_assert_eq!(stack.len(), 1);
        stack.pop().expect("empty program")
    }

    pub fn eval(&self, case: &FitnessCase) -> f64 {
        let mut stack = Vec::with_capacity(self.stack_need);
        self.eval_with(case, &mut stack)
    }
}
