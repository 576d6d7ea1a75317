//! Nominal types, structural function types and the subtype relation.
//!
//! Nominal types form a declared hierarchy rooted at `Any`. Names that are
//! referenced but never declared behave as direct subtypes of `Any`. Function
//! types are contravariant in their parameters and covariant in their return
//! type, and are subtypes of `Any` but of no other nominal type.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::frontend::lexer::tokenize;
use crate::frontend::parser::TokenCursor;
use crate::name::QualifiedName;

pub const ANY: &str = "Any";
pub const UNIT: &str = "Unit";

/// Names that resolve without a declaration.
pub const BUILTIN_TYPES: &[&str] = &[
    "Any", "Unit", "Boolean", "Byte", "Char", "Double", "Float", "Int", "List", "Long", "Set",
    "Short", "String",
];

pub fn any() -> QualifiedName {
    QualifiedName::parse(ANY).unwrap()
}

pub fn unit() -> QualifiedName {
    QualifiedName::parse(UNIT).unwrap()
}

pub fn is_builtin(name: &QualifiedName) -> bool {
    BUILTIN_TYPES.contains(&name.as_str())
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum TypeRef {
    Nominal(QualifiedName),
    Function(FunctionType),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FunctionType {
    pub params: Vec<TypeRef>,
    pub ret: Box<TypeRef>,
}

impl TypeRef {
    pub fn nominal(name: &str) -> TypeRef {
        TypeRef::Nominal(QualifiedName::parse(name).expect("valid qualified name"))
    }

    pub fn as_nominal(&self) -> Option<&QualifiedName> {
        match self {
            TypeRef::Nominal(n) => Some(n),
            TypeRef::Function(_) => None,
        }
    }

    /// Applies `f` to every nominal name, rebuilding the type.
    pub fn try_map_names<E>(
        &self,
        f: &mut impl FnMut(&QualifiedName) -> Result<QualifiedName, E>,
    ) -> Result<TypeRef, E> {
        Ok(match self {
            TypeRef::Nominal(n) => TypeRef::Nominal(f(n)?),
            TypeRef::Function(ft) => TypeRef::Function(ft.try_map_names(f)?),
        })
    }

    pub fn visit_names(&self, f: &mut impl FnMut(&QualifiedName)) {
        match self {
            TypeRef::Nominal(n) => f(n),
            TypeRef::Function(ft) => ft.visit_names(f),
        }
    }
}

impl FunctionType {
    pub fn new(params: Vec<TypeRef>, ret: TypeRef) -> Self {
        Self {
            params,
            ret: Box::new(ret),
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn try_map_names<E>(
        &self,
        f: &mut impl FnMut(&QualifiedName) -> Result<QualifiedName, E>,
    ) -> Result<FunctionType, E> {
        let params = self
            .params
            .iter()
            .map(|p| p.try_map_names(f))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(FunctionType::new(params, self.ret.try_map_names(f)?))
    }

    pub fn visit_names(&self, f: &mut impl FnMut(&QualifiedName)) {
        for p in &self.params {
            p.visit_names(f);
        }
        self.ret.visit_names(f);
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Nominal(n) => write!(f, "{n}"),
            TypeRef::Function(ft) => write!(f, "{ft}"),
        }
    }
}

impl fmt::Display for FunctionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ") -> {}", self.ret)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
#[error("invalid type `{text}`: {reason}")]
pub struct TypeParseError {
    pub text: String,
    pub reason: String,
}

impl FromStr for TypeRef {
    type Err = TypeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| TypeParseError {
            text: s.to_owned(),
            reason,
        };
        let tokens = tokenize(s).map_err(|e| err(e.message))?;
        let mut cursor = TokenCursor::new(s, &tokens);
        let ty = cursor.parse_type().map_err(|e| err(e.message()))?;
        if let Some(tok) = cursor.peek() {
            return Err(err(format!("unexpected {}", tok.kind.describe())));
        }
        Ok(ty)
    }
}

impl FromStr for FunctionType {
    type Err = TypeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<TypeRef>()? {
            TypeRef::Function(ft) => Ok(ft),
            TypeRef::Nominal(_) => Err(TypeParseError {
                text: s.to_owned(),
                reason: "expected a function type".into(),
            }),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
#[error("cyclic supertype hierarchy: {}", display_cycle(.cycle))]
pub struct CyclicHierarchy {
    pub cycle: Vec<QualifiedName>,
}

fn display_cycle(cycle: &[QualifiedName]) -> String {
    cycle
        .iter()
        .map(QualifiedName::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// Declared direct supertypes with precomputed transitive closures.
///
/// Immutable after construction, so it can be shared freely across threads.
#[derive(Clone, Debug)]
pub struct TypeHierarchy {
    direct: BTreeMap<QualifiedName, Vec<QualifiedName>>,
    closures: HashMap<QualifiedName, BTreeSet<QualifiedName>>,
    any: QualifiedName,
    top_only: BTreeSet<QualifiedName>,
}

impl TypeHierarchy {
    pub fn new(
        direct: BTreeMap<QualifiedName, Vec<QualifiedName>>,
    ) -> Result<Self, CyclicHierarchy> {
        let any = any();
        let mut closures: HashMap<QualifiedName, BTreeSet<QualifiedName>> = HashMap::new();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&QualifiedName, u8> = HashMap::new();

        for root in direct.keys() {
            if state.get(root).copied() == Some(2) {
                continue;
            }
            // Iterative post-order DFS; `path` is the current stack of names.
            let mut path: Vec<&QualifiedName> = vec![root];
            let mut next_child: Vec<usize> = vec![0];
            state.insert(root, 1);
            while let Some(&node) = path.last() {
                let idx = *next_child.last().unwrap();
                let supers = direct.get(node).map(Vec::as_slice).unwrap_or(&[]);
                if idx < supers.len() {
                    *next_child.last_mut().unwrap() += 1;
                    let sup = &supers[idx];
                    if !direct.contains_key(sup) {
                        continue;
                    }
                    match state.get(sup).copied() {
                        Some(1) => {
                            let from = path.iter().position(|n| *n == sup).unwrap();
                            let mut cycle: Vec<QualifiedName> =
                                path[from..].iter().map(|n| (*n).clone()).collect();
                            cycle.push(sup.clone());
                            return Err(CyclicHierarchy { cycle });
                        }
                        Some(2) => {}
                        _ => {
                            state.insert(sup, 1);
                            path.push(sup);
                            next_child.push(0);
                        }
                    }
                } else {
                    let mut closure = BTreeSet::new();
                    for sup in supers {
                        if *sup == any {
                            continue;
                        }
                        closure.insert(sup.clone());
                        if let Some(inner) = closures.get(sup) {
                            closure.extend(inner.iter().cloned());
                        }
                    }
                    if *node != any {
                        closure.insert(any.clone());
                    }
                    closures.insert(node.clone(), closure);
                    state.insert(node, 2);
                    path.pop();
                    next_child.pop();
                }
            }
        }

        let top_only = BTreeSet::from([any.clone()]);
        Ok(Self {
            direct,
            closures,
            any,
            top_only,
        })
    }

    pub fn empty() -> Self {
        Self::new(BTreeMap::new()).expect("empty hierarchy is acyclic")
    }

    pub fn direct_supers(&self, name: &QualifiedName) -> &[QualifiedName] {
        self.direct.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All strict transitive supertypes of `name`, always containing `Any`
    /// unless `name` is `Any` itself.
    pub fn super_closure(&self, name: &QualifiedName) -> &BTreeSet<QualifiedName> {
        static EMPTY: BTreeSet<QualifiedName> = BTreeSet::new();
        if *name == self.any {
            return &EMPTY;
        }
        self.closures.get(name).unwrap_or(&self.top_only)
    }

    pub fn is_nominal_subtype(&self, sub: &QualifiedName, sup: &QualifiedName) -> bool {
        sub == sup || self.super_closure(sub).contains(sup)
    }

    pub fn is_subtype_of(&self, s: &TypeRef, t: &TypeRef) -> bool {
        if s == t {
            return true;
        }
        match (s, t) {
            (_, TypeRef::Nominal(top)) if *top == self.any => true,
            (TypeRef::Nominal(a), TypeRef::Nominal(b)) => self.super_closure(a).contains(b),
            (TypeRef::Function(f), TypeRef::Function(g)) => self.is_function_subtype(f, g),
            _ => false,
        }
    }

    pub fn is_function_subtype(&self, s: &FunctionType, t: &FunctionType) -> bool {
        s.arity() == t.arity()
            && s
                .params
                .iter()
                .zip(&t.params)
                .all(|(sp, tp)| self.is_subtype_of(tp, sp))
            && self.is_subtype_of(&s.ret, &t.ret)
    }
}
