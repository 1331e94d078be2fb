//! Instantiation of placeholder identifiers with every feasible in-scope
//! name: accessible at the edited statement, and type-correct once
//! substituted.

use crate::edit::EditContext;
use crate::grammar::{Ast, NodeId};
use crate::minilang::{collect_identifiers, typecheck, PLACEHOLDER};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlaceholderError {
    #[error("{0} placeholders; at most one can be instantiated")]
    TooMany(usize),
}

/// A concrete program derived from a patched one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instantiation {
    /// The substituted identifier, `None` if there was no placeholder.
    pub name: Option<String>,
    pub program: Ast,
}

/// Terminal nodes carrying the placeholder token, in pre-order.
pub fn find_placeholders(tree: &Ast) -> Vec<NodeId> {
    tree.nodes()
        .iter()
        .filter(|n| n.children.is_empty() && n.token.as_deref() == Some(PLACEHOLDER))
        .map(|n| n.id)
        .collect()
}

/// Candidate names for a placeholder in a patch of `ctx`, in declaration
/// order, deduplicated by name.
pub fn candidate_names(ctx: &EditContext) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for ident in collect_identifiers(&ctx.program, ctx.faulty).unwrap_or_default() {
        if !names.contains(&ident.name) {
            names.push(ident.name);
        }
    }
    names
}

/// All feasible instantiations of `patched`. Without placeholders the
/// program is returned unchanged.
pub fn instantiate_all(patched: &Ast, ctx: &EditContext) -> Result<Vec<Instantiation>, PlaceholderError> {
    let holes = find_placeholders(patched);
    match holes.as_slice() {
        [] => Ok(vec![Instantiation {
            name: None,
            program: patched.clone(),
        }]),
        [hole] => Ok(candidate_names(ctx)
            .into_iter()
            .filter_map(|name| {
                let program = patched.with_token(*hole, name.clone()).ok()?;
                typecheck(&program).ok()?;
                Some(Instantiation {
                    name: Some(name),
                    program,
                })
            })
            .collect()),
        many => Err(PlaceholderError::TooMany(many.len())),
    }
}
