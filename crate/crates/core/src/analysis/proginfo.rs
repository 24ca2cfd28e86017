use std::collections::BTreeMap;

use crate::ir::QName;

/// Analysis results for one module (`local`) and the interfaces of its
/// direct imports (`imported`). The two key sets are disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgInfo<A> {
    local: BTreeMap<QName, A>,
    imported: BTreeMap<QName, A>,
}

impl<A> Default for ProgInfo<A> {
    fn default() -> Self {
        ProgInfo {
            local: BTreeMap::new(),
            imported: BTreeMap::new(),
        }
    }
}

impl<A> ProgInfo<A> {
    /// # Panics
    /// If a name is present in both maps.
    pub fn new(local: BTreeMap<QName, A>, imported: BTreeMap<QName, A>) -> Self {
        if let Some(q) = local.keys().find(|q| imported.contains_key(*q)) {
            panic!("ProgInfo: {q} is both local and imported");
        }
        ProgInfo { local, imported }
    }

    pub fn lookup(&self, q: &QName) -> Option<&A> {
        self.local.get(q).or_else(|| self.imported.get(q))
    }

    pub fn local(&self) -> &BTreeMap<QName, A> {
        &self.local
    }

    pub fn imported(&self) -> &BTreeMap<QName, A> {
        &self.imported
    }

    pub fn into_parts(self) -> (BTreeMap<QName, A>, BTreeMap<QName, A>) {
        (self.local, self.imported)
    }

    pub fn map<B>(&self, mut f: impl FnMut(&A) -> B) -> ProgInfo<B> {
        ProgInfo {
            local: self.local.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
            imported: self.imported.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
        }
    }
}

/// Local value if present, else imported value, else `None`.
pub fn lookup_prog_info<'a, A>(q: &QName, info: &'a ProgInfo<A>) -> Option<&'a A> {
    info.lookup(q)
}
