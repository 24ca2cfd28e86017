use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;

use super::{AbstractValue, Analysis, AnalysisError, BaseInfo, Kind, ProgInfo, RunEnv, Target};
use crate::fixpoint;
use crate::ir::{Module, QName};

/// Serialized abstract values keyed by entity.
pub type ValueMap = BTreeMap<QName, Value>;

/// Domain-independent view of an [`Analysis`], used by the registry, the
/// module manager and the workers. Values cross this boundary serialized.
pub trait ErasedAnalysis: Send + Sync {
    fn name(&self) -> &str;
    fn target(&self) -> Target;
    fn kind(&self) -> Kind;
    fn base(&self) -> Option<&Arc<dyn ErasedAnalysis>>;

    /// Analyzes one module given the serialized import interface values.
    fn analyze_values(
        &self,
        module: &Module,
        imported: &ValueMap,
        base: Option<&BaseInfo>,
        env: &RunEnv,
    ) -> Result<ValueMap, AnalysisError>;

    /// Decodes serialized results into a typed [`ProgInfo`] wrapped as
    /// base information for a combined analysis.
    fn decode_info(&self, local: &ValueMap, imported: &ValueMap) -> Result<BaseInfo, AnalysisError>;
}

impl<A: AbstractValue> Analysis<A> {
    pub(crate) fn decode_map(&self, values: &ValueMap) -> Result<BTreeMap<QName, A>, AnalysisError> {
        values
            .iter()
            .map(|(q, v)| {
                serde_json::from_value(v.clone())
                    .map(|a| (q.clone(), a))
                    .map_err(|e| AnalysisError::Codec {
                        analysis: self.name.clone(),
                        entity: q.to_string(),
                        message: e.to_string(),
                    })
            })
            .collect()
    }

    pub(crate) fn encode_map(&self, values: &BTreeMap<QName, A>) -> Result<ValueMap, AnalysisError> {
        values
            .iter()
            .map(|(q, a)| {
                serde_json::to_value(a)
                    .map(|v| (q.clone(), v))
                    .map_err(|e| AnalysisError::Codec {
                        analysis: self.name.clone(),
                        entity: q.to_string(),
                        message: e.to_string(),
                    })
            })
            .collect()
    }

    /// Typed results of one module, decoded from serialized maps.
    pub fn decode_prog_info(
        &self,
        local: &ValueMap,
        imported: &ValueMap,
    ) -> Result<ProgInfo<A>, AnalysisError> {
        Ok(ProgInfo::new(self.decode_map(local)?, self.decode_map(imported)?))
    }
}

impl<A: AbstractValue> ErasedAnalysis for Analysis<A> {
    fn name(&self) -> &str {
        &self.name
    }

    fn target(&self) -> Target {
        Analysis::target(self)
    }

    fn kind(&self) -> Kind {
        self.kind
    }

    fn base(&self) -> Option<&Arc<dyn ErasedAnalysis>> {
        self.base.as_ref()
    }

    fn analyze_values(
        &self,
        module: &Module,
        imported: &ValueMap,
        base: Option<&BaseInfo>,
        env: &RunEnv,
    ) -> Result<ValueMap, AnalysisError> {
        let values = if self.kind.is_dependency() {
            let imported = self.decode_map(imported)?;
            fixpoint::solve(self, module, &imported, base, env)?.values
        } else {
            fixpoint::run_simple(self, module, base, env)?
        };
        self.encode_map(&values)
    }

    fn decode_info(&self, local: &ValueMap, imported: &ValueMap) -> Result<BaseInfo, AnalysisError> {
        Ok(BaseInfo::new(self.decode_prog_info(local, imported)?))
    }
}
