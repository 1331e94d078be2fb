use serde::{Deserialize, Serialize};

use super::{GrammarError, SymbolId};

/// 1-based pre-order position of a node within its [`Ast`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Owned recursive tree, convenient for construction and rewriting.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tree {
    pub symbol: SymbolId,
    pub token: Option<String>,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn node(symbol: SymbolId, children: Vec<Tree>) -> Self {
        Self {
            symbol,
            token: None,
            children,
        }
    }

    pub fn leaf(symbol: SymbolId, token: impl Into<String>) -> Self {
        Self {
            symbol,
            token: Some(token.into()),
            children: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Tree)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub id: NodeId,
    pub symbol: SymbolId,
    pub token: Option<String>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    /// Number of nodes in the subtree rooted here, including itself.
    pub size: u32,
}

/// Pre-order flattened tree. Node `i` lives at `nodes[i - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ast {
    nodes: Vec<AstNode>,
}

impl Ast {
    pub fn from_tree(tree: &Tree) -> Self {
        let mut nodes = Vec::with_capacity(tree.size());
        fn go(t: &Tree, parent: Option<NodeId>, nodes: &mut Vec<AstNode>) -> NodeId {
            let id = NodeId(nodes.len() as u32 + 1);
            nodes.push(AstNode {
                id,
                symbol: t.symbol,
                token: t.token.clone(),
                children: Vec::with_capacity(t.children.len()),
                parent,
                size: 0,
            });
            for c in &t.children {
                let cid = go(c, Some(id), nodes);
                nodes[id.index()].children.push(cid);
            }
            nodes[id.index()].size = nodes.len() as u32 + 1 - id.0;
            id
        }
        go(tree, None, &mut nodes);
        Self { nodes }
    }

    pub fn root(&self) -> NodeId {
        NodeId(1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[AstNode] {
        &self.nodes
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 >= 1 && (id.0 as usize) <= self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&AstNode, GrammarError> {
        if self.contains(id) {
            Ok(&self.nodes[id.index()])
        } else {
            Err(GrammarError::UnknownNode(id.0))
        }
    }

    /// Panicking accessor for ids known to be valid.
    pub fn get(&self, id: NodeId) -> &AstNode {
        &self.nodes[id.index()]
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> {
        (1..=self.nodes.len() as u32).map(NodeId)
    }

    pub fn subtree_size(&self, id: NodeId) -> Result<usize, GrammarError> {
        Ok(self.node(id)?.size as usize)
    }

    /// Ids of `id` and all its descendants, in pre-order.
    pub fn descendants(&self, id: NodeId) -> impl Iterator<Item = NodeId> {
        let size = self.nodes.get(id.index()).map_or(0, |n| n.size);
        (id.0..id.0 + size).map(NodeId)
    }

    pub fn is_ancestor_or_self(&self, anc: NodeId, id: NodeId) -> bool {
        let a = self.get(anc);
        id.0 >= anc.0 && id.0 < anc.0 + a.size
    }

    /// Ancestors of `id`, nearest first, excluding `id` itself.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.get(id).parent, |p| self.get(*p).parent)
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.ancestors(id).count()
    }

    /// Copy of the subtree rooted at `id`, renumbered from 1.
    pub fn subtree(&self, id: NodeId) -> Result<Ast, GrammarError> {
        Ok(Ast::from_tree(&self.to_tree(id)?))
    }

    pub fn to_tree(&self, id: NodeId) -> Result<Tree, GrammarError> {
        let n = self.node(id)?;
        Ok(Tree {
            symbol: n.symbol,
            token: n.token.clone(),
            children: n
                .children
                .iter()
                .map(|c| self.to_tree(*c))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn tree(&self) -> Tree {
        self.to_tree(self.root()).expect("non-empty ast")
    }

    /// Same shape, symbols and tokens.
    pub fn structural_equal(&self, other: &Ast) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| {
                a.symbol == b.symbol && a.token == b.token && a.children.len() == b.children.len()
            })
    }

    /// Structural equality of two subtrees, possibly of different trees.
    pub fn subtree_equal(&self, a: NodeId, other: &Ast, b: NodeId) -> bool {
        let (na, nb) = (self.get(a), other.get(b));
        if na.size != nb.size {
            return false;
        }
        (0..na.size).all(|k| {
            let x = &self.nodes[a.index() + k as usize];
            let y = &other.nodes[b.index() + k as usize];
            x.symbol == y.symbol && x.token == y.token && x.children.len() == y.children.len()
        })
    }

    /// Copy with the token of terminal `id` replaced.
    pub fn with_token(&self, id: NodeId, token: impl Into<String>) -> Result<Ast, GrammarError> {
        let mut out = self.clone();
        let n = &mut out.nodes[self.node(id)?.id.index()];
        if n.token.is_none() {
            return Err(GrammarError::Malformed {
                id: id.0,
                reason: "not a terminal".into(),
            });
        }
        n.token = Some(token.into());
        Ok(out)
    }

    /// Position of `id` among its parent's children.
    pub fn child_index(&self, id: NodeId) -> Option<usize> {
        let p = self.get(id).parent?;
        self.get(p).children.iter().position(|c| *c == id)
    }

    /// Nodes that are leaves (no children), in pre-order.
    pub fn leaves(&self) -> impl Iterator<Item = &AstNode> {
        self.nodes.iter().filter(|n| n.children.is_empty())
    }
}
