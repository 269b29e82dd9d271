//! Variation operators: subtree crossover and three mutations.
//!
//! Every operator preserves the global depth cap of 17 (root at depth zero).
//! Crossover retries a bounded number of times and then falls back to
//! copying the first parent; mutations cap the depth budget of newly grown
//! material at the site instead.

use rand::Rng;

use super::tree::{grow_node, ExprTree, Node, FUNCTIONS, TERMINALS};

/// Deepest level any tree may reach, with the root at depth zero.
pub const MAX_DEPTH: usize = 17;

/// Depth budget for subtrees grown by the mutation operators, further capped
/// by the room left under [`MAX_DEPTH`] at the mutation site.
pub const MUTATION_GROW_BUDGET: usize = 6;

/// One initial site draw plus three retries before crossover gives up.
const CROSSOVER_ATTEMPTS: usize = 4;

/// Subtree crossover. A function node is drawn uniformly in each parent
/// (roots excluded, so the offspring is never a plain copy of the donor) and
/// the first parent's subtree is replaced by a copy of the second parent's.
/// Offspring deeper than [`MAX_DEPTH`] are rejected and redrawn; after
/// [`CROSSOVER_ATTEMPTS`] failures, or when either parent has no eligible
/// site, the first parent is copied unchanged.
pub fn crossover<R: Rng>(rng: &mut R, p1: &ExprTree, p2: &ExprTree) -> ExprTree {
    let sites1 = p1.function_indices_excluding_root();
    let sites2 = p2.function_indices_excluding_root();
    if sites1.is_empty() || sites2.is_empty() {
        return p1.clone();
    }
    for _ in 0..CROSSOVER_ATTEMPTS {
        let site = sites1[rng.random_range(0..sites1.len())];
        let donor = sites2[rng.random_range(0..sites2.len())];
        let child = p1.replaced(site, p2.subtree(donor));
        if child.depth() <= MAX_DEPTH {
            return child;
        }
    }
    p1.clone()
}

/// Branch mutation: a node drawn uniformly over the whole tree (root
/// included) is replaced by a freshly grown subtree.
pub fn branch_mutation<R: Rng>(rng: &mut R, parent: &ExprTree) -> ExprTree {
    let site = rng.random_range(0..parent.node_count());
    let budget = MUTATION_GROW_BUDGET.min(MAX_DEPTH - parent.node_depth(site));
    let replacement = grow_node(rng, budget);
    parent.replaced(site, &replacement)
}

/// Point mutation: one node's symbol is swapped for a different symbol of
/// the same arity, leaving the tree's shape untouched. Every symbol has at
/// least one same-arity alternative, so the offspring always differs.
pub fn point_mutation<R: Rng>(rng: &mut R, parent: &ExprTree) -> ExprTree {
    let site = rng.random_range(0..parent.node_count());
    match parent.subtree(site) {
        Node::Term(t) => {
            let options: Vec<_> = TERMINALS.iter().copied().filter(|o| o != t).collect();
            let new = options[rng.random_range(0..options.len())];
            parent.replaced(site, &Node::Term(new))
        }
        Node::Op(f, children) => {
            let options: Vec<_> = FUNCTIONS
                .iter()
                .copied()
                .filter(|o| o.arity() == f.arity() && o != f)
                .collect();
            let new = options[rng.random_range(0..options.len())];
            parent.replaced(site, &Node::Op(new, children.clone()))
        }
    }
}

/// Expansion mutation: a terminal drawn uniformly over the leaf positions is
/// replaced by a freshly grown subtree, deepening the expression in place.
pub fn expansion_mutation<R: Rng>(rng: &mut R, parent: &ExprTree) -> ExprTree {
    let leaves = parent.terminal_indices();
    let site = leaves[rng.random_range(0..leaves.len())];
    let budget = MUTATION_GROW_BUDGET.min(MAX_DEPTH - parent.node_depth(site));
    let replacement = grow_node(rng, budget);
    parent.replaced(site, &replacement)
}
