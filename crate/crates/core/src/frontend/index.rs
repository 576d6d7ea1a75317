//! The project-wide entity index and name resolution.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use super::ast::{Declaration, EntityKind, SourceFile};
use super::FrontendError;
use crate::name::{LineIndex, QualifiedName, SourcePos};
use crate::types::{self, CyclicHierarchy, FunctionType, TypeHierarchy, TypeRef};

/// A flattened declaration with its fully qualified name and resolved references.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Entity {
    pub kind: EntityKind,
    pub fqn: QualifiedName,
    pub name: String,
    pub package: QualifiedName,
    /// Sorted, deduplicated.
    pub annotations: Vec<QualifiedName>,
    /// Sorted, deduplicated. Empty for functions.
    pub supertypes: Vec<QualifiedName>,
    /// Functions only. Member functions of classes carry the class as first parameter.
    pub signature: Option<FunctionType>,
    pub is_top_level: bool,
    pub is_companion: bool,
    /// Absent for entities loaded from a library meta file.
    pub location: Option<SourcePos>,
}

impl Entity {
    pub fn param_count(&self) -> usize {
        self.signature.as_ref().map_or(0, FunctionType::arity)
    }

    /// Every name this entity refers to.
    pub fn referenced_names(&self, out: &mut impl FnMut(&QualifiedName)) {
        self.annotations.iter().for_each(&mut *out);
        self.supertypes.iter().for_each(&mut *out);
        if let Some(sig) = &self.signature {
            sig.visit_names(out);
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum NameError {
    #[error("unresolved name `{name}`")]
    UnresolvedName { name: QualifiedName },
    #[error("ambiguous name `{name}`: candidates {}", join(.candidates))]
    AmbiguousName {
        name: QualifiedName,
        candidates: Vec<QualifiedName>,
    },
}

fn join(names: &[QualifiedName]) -> String {
    names
        .iter()
        .map(QualifiedName::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

/// A set of resolvable names with a lookup by package-relative suffix.
#[derive(Clone, Debug, Default)]
pub struct NameTable {
    names: HashSet<QualifiedName>,
    by_suffix: HashMap<String, Vec<QualifiedName>>,
}

impl NameTable {
    pub fn new<'a>(
        names: impl IntoIterator<Item = &'a QualifiedName>,
        packages: &BTreeSet<QualifiedName>,
    ) -> Self {
        let mut table = NameTable::default();
        for name in names {
            if !table.names.insert(name.clone()) {
                continue;
            }
            let text = name.as_str();
            for (i, _) in text.match_indices('.') {
                let prefix = QualifiedName::parse(&text[..i]).expect("prefix of a valid name");
                if packages.contains(&prefix) {
                    table
                        .by_suffix
                        .entry(text[i + 1..].to_owned())
                        .or_default()
                        .push(name.clone());
                }
            }
        }
        for candidates in table.by_suffix.values_mut() {
            candidates.sort();
            candidates.dedup();
        }
        table
    }

    pub fn contains(&self, name: &QualifiedName) -> bool {
        self.names.contains(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Resolution order: already fully qualified, then the context package,
    /// then a unique match in any package.
    pub fn resolve(
        &self,
        context: &QualifiedName,
        name: &QualifiedName,
    ) -> Result<QualifiedName, NameError> {
        if self.names.contains(name) {
            return Ok(name.clone());
        }
        let local = context.join(name);
        if self.names.contains(&local) {
            return Ok(local);
        }
        match self.by_suffix.get(name.as_str()).map(Vec::as_slice) {
            Some([only]) => Ok(only.clone()),
            Some(many) if many.len() > 1 => Err(NameError::AmbiguousName {
                name: name.clone(),
                candidates: many.to_vec(),
            }),
            _ => Err(NameError::UnresolvedName { name: name.clone() }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EntityIndex {
    pub classes: Vec<Entity>,
    pub objects: Vec<Entity>,
    pub functions: Vec<Entity>,
    pub packages: Vec<QualifiedName>,
    by_fqn: HashMap<QualifiedName, (EntityKind, usize)>,
    names: NameTable,
}

impl PartialEq for EntityIndex {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.objects == other.objects
            && self.functions == other.functions
            && self.packages == other.packages
    }
}

impl Eq for EntityIndex {}

impl Default for EntityIndex {
    fn default() -> Self {
        Self::from_entities(Vec::new(), BTreeSet::new()).expect("empty index")
    }
}

impl EntityIndex {
    /// Builds an index from already-resolved entities. Fails with the first
    /// duplicated FQN (in sorted order).
    pub fn from_entities(
        entities: Vec<Entity>,
        packages: BTreeSet<QualifiedName>,
    ) -> Result<Self, QualifiedName> {
        let mut classes = Vec::new();
        let mut objects = Vec::new();
        let mut functions = Vec::new();
        for e in entities {
            match e.kind {
                EntityKind::Class => classes.push(e),
                EntityKind::Object => objects.push(e),
                EntityKind::Function => functions.push(e),
            }
        }
        for list in [&mut classes, &mut objects, &mut functions] {
            list.sort_by(|a, b| a.fqn.cmp(&b.fqn));
        }

        let mut by_fqn = HashMap::new();
        let mut duplicates = Vec::new();
        for (kind, list) in [
            (EntityKind::Class, &classes),
            (EntityKind::Object, &objects),
            (EntityKind::Function, &functions),
        ] {
            for (i, e) in list.iter().enumerate() {
                if by_fqn.insert(e.fqn.clone(), (kind, i)).is_some() {
                    duplicates.push(e.fqn.clone());
                }
            }
        }
        if let Some(dup) = duplicates.into_iter().min() {
            return Err(dup);
        }

        let mut known: BTreeSet<QualifiedName> = by_fqn.keys().cloned().collect();
        for e in classes.iter().chain(&objects).chain(&functions) {
            e.referenced_names(&mut |n| {
                known.insert(n.clone());
            });
        }
        known.extend(
            types::BUILTIN_TYPES
                .iter()
                .map(|b| QualifiedName::parse(b).unwrap()),
        );
        let names = NameTable::new(&known, &packages);

        Ok(Self {
            classes,
            objects,
            functions,
            packages: packages.into_iter().collect(),
            by_fqn,
            names,
        })
    }

    pub fn entities(&self, kind: EntityKind) -> &[Entity] {
        match kind {
            EntityKind::Class => &self.classes,
            EntityKind::Object => &self.objects,
            EntityKind::Function => &self.functions,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entity> {
        self.classes
            .iter()
            .chain(&self.objects)
            .chain(&self.functions)
    }

    pub fn len(&self) -> usize {
        self.classes.len() + self.objects.len() + self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, fqn: &QualifiedName) -> Option<&Entity> {
        self.by_fqn
            .get(fqn)
            .map(|&(kind, i)| &self.entities(kind)[i])
    }

    pub fn contains(&self, fqn: &QualifiedName) -> bool {
        self.by_fqn.contains_key(fqn)
    }

    /// Names that query chains may refer to: declared entities, builtins, and
    /// every name referenced by a declaration.
    pub fn names(&self) -> &NameTable {
        &self.names
    }

    pub fn resolve_name(
        &self,
        context: &QualifiedName,
        name: &QualifiedName,
    ) -> Result<QualifiedName, NameError> {
        self.names.resolve(context, name)
    }

    pub fn hierarchy(&self) -> Result<TypeHierarchy, CyclicHierarchy> {
        let direct: BTreeMap<_, _> = self
            .classes
            .iter()
            .chain(&self.objects)
            .map(|e| (e.fqn.clone(), e.supertypes.clone()))
            .collect();
        TypeHierarchy::new(direct)
    }

    /// Union of two indexes. Fails with the first FQN both declare.
    pub fn merge(&self, other: &EntityIndex) -> Result<EntityIndex, QualifiedName> {
        let entities = self.iter().chain(other.iter()).cloned().collect();
        let packages = self
            .packages
            .iter()
            .chain(&other.packages)
            .cloned()
            .collect();
        EntityIndex::from_entities(entities, packages)
    }
}

pub fn build_index(files: &[SourceFile]) -> Result<EntityIndex, FrontendError> {
    build_index_linked(files, &EntityIndex::default())
}

/// Builds the index of `files`, resolving their references against their own
/// declarations plus the names of `external` (a linked library). The external
/// entities are not part of the result.
pub fn build_index_linked(
    files: &[SourceFile],
    external: &EntityIndex,
) -> Result<EntityIndex, FrontendError> {
    let mut sorted: Vec<&SourceFile> = files.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));

    let mut packages: BTreeSet<QualifiedName> = BTreeSet::new();
    let mut declared: Vec<(QualifiedName, &SourceFile, &Declaration, SourcePos)> = Vec::new();
    let mut first_site: HashMap<QualifiedName, SourcePos> = HashMap::new();
    for file in &sorted {
        packages.insert(file.package.clone());
        let lines = LineIndex::new(&file.text);
        for decl in file.all_declarations() {
            let fqn = file.package.join(&decl.local_path());
            let here = SourcePos::indexed(&file.path, &file.text, &lines, decl.span);
            if let Some(first) = first_site.get(&fqn) {
                return Err(FrontendError::DuplicateFqn {
                    name: fqn,
                    first: first.clone(),
                    second: here,
                });
            }
            first_site.insert(fqn.clone(), here.clone());
            declared.push((fqn, file, decl, here));
        }
    }

    let mut universe_packages = packages.clone();
    universe_packages.extend(external.packages.iter().cloned());
    let builtins: Vec<QualifiedName> = types::BUILTIN_TYPES
        .iter()
        .map(|b| QualifiedName::parse(b).unwrap())
        .collect();
    let universe = NameTable::new(
        declared
            .iter()
            .map(|(fqn, _, _, _)| fqn)
            .chain(external.by_fqn.keys())
            .chain(&builtins),
        &universe_packages,
    );

    let kinds: HashMap<&QualifiedName, EntityKind> =
        declared.iter().map(|(f, _, d, _)| (f, d.kind)).collect();
    let mut entities = Vec::with_capacity(declared.len());
    for (fqn, file, decl, here) in &declared {
        let at = || here.clone();
        let mut resolve = |name: &QualifiedName| -> Result<QualifiedName, FrontendError> {
            resolve_reference(&universe, &file.package, name)
                .map_err(|source| FrontendError::Name { at: at(), source })
        };

        let mut annotations = decl
            .annotations
            .iter()
            .map(&mut resolve)
            .collect::<Result<Vec<_>, _>>()?;
        annotations.sort();
        annotations.dedup();
        let mut supertypes = decl
            .supertypes
            .iter()
            .map(&mut resolve)
            .collect::<Result<Vec<_>, _>>()?;
        supertypes.sort();
        supertypes.dedup();

        let signature = match decl.signature() {
            Some(sig) => {
                let mut sig = sig.try_map_names(&mut resolve)?;
                if let Some(outer) = &decl.enclosing {
                    let outer_fqn = file.package.join(outer);
                    if kinds.get(&outer_fqn) == Some(&EntityKind::Class) {
                        sig.params.insert(0, TypeRef::Nominal(outer_fqn));
                    }
                }
                Some(sig)
            }
            None => None,
        };

        entities.push(Entity {
            kind: decl.kind,
            fqn: fqn.clone(),
            name: decl.name.clone(),
            package: file.package.clone(),
            annotations,
            supertypes,
            signature,
            is_top_level: decl.is_top_level(),
            is_companion: decl.is_companion,
            location: Some(at()),
        });
    }

    EntityIndex::from_entities(entities, packages).map_err(|name| {
        // Unreachable in practice: duplicates were rejected above.
        let pos = first_site[&name].clone();
        FrontendError::DuplicateFqn {
            name,
            first: pos.clone(),
            second: pos,
        }
    })
}

/// Resolution of names written in declarations. Unlike query chains, a
/// declaration may mention a name nothing declares: a simple name then
/// belongs to the current package, a dotted one is taken as written.
fn resolve_reference(
    universe: &NameTable,
    package: &QualifiedName,
    name: &QualifiedName,
) -> Result<QualifiedName, NameError> {
    match universe.resolve(package, name) {
        Ok(resolved) => Ok(resolved),
        Err(NameError::UnresolvedName { .. }) if name.is_simple() => Ok(package.join(name)),
        Err(NameError::UnresolvedName { .. }) => Ok(name.clone()),
        Err(ambiguous) => Err(ambiguous),
    }
}
