//! Answers queries against an entity index.

use rayon::prelude::*;
use serde::Serialize;

use crate::frontend::{Entity, EntityIndex, EntityKind};
use crate::name::QualifiedName;
use crate::query::{Predicate, Query, QueryId, Shape};
use crate::types::{self, TypeHierarchy};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
pub struct EntityRef {
    pub fqn: QualifiedName,
    pub kind: EntityKind,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ResolvedResult {
    pub query: QueryId,
    pub kind: EntityKind,
    pub shape: Shape,
    /// Sorted by FQN, no duplicates.
    pub refs: Vec<EntityRef>,
}

/// True iff `entity` satisfies every constraint of `query`.
pub fn match_entity(h: &TypeHierarchy, entity: &Entity, query: &Query) -> bool {
    if entity.kind != query.kind {
        return false;
    }
    // Both lists are sorted.
    let annotations_ok = query
        .annotations
        .iter()
        .all(|a| entity.annotations.binary_search(a).is_ok());
    if !annotations_ok {
        return false;
    }
    let types_ok = match query.kind {
        EntityKind::Class | EntityKind::Object => {
            let closure = h.super_closure(&entity.fqn);
            query
                .supertypes
                .iter()
                .all(|s| s.as_str() == types::ANY || closure.contains(s))
        }
        EntityKind::Function => match (&query.signature, &entity.signature) {
            (None, _) => true,
            (Some(wanted), Some(actual)) => h.is_function_subtype(actual, wanted),
            (Some(_), None) => false,
        },
    };
    types_ok
        && query
            .predicate
            .as_ref()
            .is_none_or(|p| eval_predicate(p, entity, h))
}

pub fn eval_predicate(p: &Predicate, e: &Entity, h: &TypeHierarchy) -> bool {
    match p {
        Predicate::Or(a, b) => eval_predicate(a, e, h) || eval_predicate(b, e, h),
        Predicate::And(a, b) => eval_predicate(a, e, h) && eval_predicate(b, e, h),
        Predicate::Not(a) => !eval_predicate(a, e, h),
        Predicate::NameEq(s) => e.name == *s,
        Predicate::NameNe(s) => e.name != *s,
        Predicate::IsTopLevel => e.is_top_level,
        Predicate::IsCompanion => e.kind == EntityKind::Object && e.is_companion,
        Predicate::ParamCount(op, n) => {
            let count = match e.kind {
                EntityKind::Function => e.param_count() as i64,
                _ => 0,
            };
            op.apply(count, *n)
        }
        Predicate::HasAnnotation(s) => e.annotations.iter().any(|a| a.as_str() == s),
        Predicate::HasSupertype(s) => match e.kind {
            EntityKind::Function => s == types::ANY,
            _ => h.super_closure(&e.fqn).iter().any(|n| n.as_str() == s),
        },
    }
}

pub fn resolve_query(index: &EntityIndex, h: &TypeHierarchy, query: &Query) -> ResolvedResult {
    // Entity lists are already sorted by FQN and FQNs are unique, so the
    // filtered list is both sorted and duplicate-free for either shape.
    let refs = index
        .entities(query.kind)
        .iter()
        .filter(|e| match_entity(h, e, query))
        .map(|e| EntityRef {
            fqn: e.fqn.clone(),
            kind: e.kind,
        })
        .collect();
    ResolvedResult {
        query: query.id.clone(),
        kind: query.kind,
        shape: query.shape,
        refs,
    }
}

/// Resolves every query; the output is in input order.
pub fn resolve_all(
    index: &EntityIndex,
    h: &TypeHierarchy,
    queries: &[Query],
) -> Vec<ResolvedResult> {
    queries
        .par_iter()
        .map(|q| resolve_query(index, h, q))
        .collect()
}
