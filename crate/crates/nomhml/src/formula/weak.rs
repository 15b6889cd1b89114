//! The sublogics: weak formulas (predicates only guarded under a weak tau),
//! extended weak formulas with preformula disjunction, and the
//! effect-consequence grammar for effect-indexed bisimilarities.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::formula::Formula;
use crate::nominal::{NameSet, Nominal, Perm};
use crate::nts::{ActLabel, Nts, PredId};

/// Weak formulas: `A ::= ⋀A | ¬A | ⟨⟨α⟩⟩A | ⟨⟨τ⟩⟩(A ∧ φ)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum WeakFormula {
    Conj(BTreeSet<WeakFormula>),
    Neg(Box<WeakFormula>),
    /// `⟨⟨α⟩⟩A`; for the unobservable action this is plain `⟨⟨τ⟩⟩A`.
    WMay { act: ActLabel, body: Box<WeakFormula> },
    /// `⟨⟨τ⟩⟩(A ∧ φ)`: silently reach a state satisfying the predicate where
    /// the body also holds.
    TauPred { body: Box<WeakFormula>, pred: PredId },
}

impl WeakFormula {
    pub fn top() -> WeakFormula {
        WeakFormula::Conj(BTreeSet::new())
    }

    pub fn neg(self) -> WeakFormula {
        WeakFormula::Neg(Box::new(self))
    }

    pub fn conj(items: impl IntoIterator<Item = WeakFormula>) -> WeakFormula {
        WeakFormula::Conj(items.into_iter().collect())
    }

    pub fn conj2(a: WeakFormula, b: WeakFormula) -> WeakFormula {
        WeakFormula::conj([a, b])
    }

    pub fn disj(items: impl IntoIterator<Item = WeakFormula>) -> WeakFormula {
        WeakFormula::conj(items.into_iter().map(WeakFormula::neg)).neg()
    }

    pub fn wmay(act: ActLabel, body: WeakFormula) -> WeakFormula {
        WeakFormula::WMay { act, body: Box::new(body) }
    }

    pub fn tau_pred(body: WeakFormula, pred: PredId) -> WeakFormula {
        WeakFormula::TauPred { body: Box::new(body), pred }
    }

    /// `⟨⟨τ⟩⟩φ`, sugar for `⟨⟨τ⟩⟩(⊤ ∧ φ)`.
    pub fn tau_only_pred(pred: PredId) -> WeakFormula {
        WeakFormula::tau_pred(WeakFormula::top(), pred)
    }

    /// Expansion into the core logic at the target system's saturation depth.
    pub fn to_formula(&self, nts: &Nts) -> Result<Formula> {
        Ok(match self {
            WeakFormula::Conj(items) => Formula::conj(
                items.iter().map(|i| i.to_formula(nts)).collect::<Result<Vec<_>>>()?,
            )?,
            WeakFormula::Neg(inner) => inner.to_formula(nts)?.neg(),
            WeakFormula::WMay { act, body } => {
                crate::formula::wmay(nts, act, &body.to_formula(nts)?)?
            }
            WeakFormula::TauPred { body, pred } => {
                let conj = Formula::conj2(body.to_formula(nts)?, Formula::Pred(*pred));
                match nts.tau() {
                    Some(tau) => crate::formula::wmay(nts, &tau, &conj)?,
                    // Without unobservable actions the closure is reflexive.
                    None => conj,
                }
            }
        })
    }

    pub fn permute(&self, nts: &Nts, p: &Perm) -> WeakFormula {
        match self {
            WeakFormula::Conj(items) => {
                WeakFormula::Conj(items.iter().map(|i| i.permute(nts, p)).collect())
            }
            WeakFormula::Neg(inner) => inner.permute(nts, p).neg(),
            WeakFormula::WMay { act, body } => {
                WeakFormula::WMay { act: act.permute(p), body: Box::new(body.permute(nts, p)) }
            }
            WeakFormula::TauPred { body, pred } => WeakFormula::TauPred {
                body: Box::new(body.permute(nts, p)),
                pred: nts.permute_pred(p, *pred),
            },
        }
    }

    pub fn support(&self, nts: &Nts) -> NameSet {
        match self {
            WeakFormula::Conj(items) => items
                .iter()
                .fold(NameSet::empty(), |acc, i| acc.union(i.support(nts))),
            WeakFormula::Neg(inner) => inner.support(nts),
            WeakFormula::WMay { act, body } => act
                .occurring()
                .union(body.support(nts))
                .difference(nts.bn(act)),
            WeakFormula::TauPred { body, pred } => body.support(nts).union(nts.pred_support(*pred)),
        }
    }
}

/// Extended weak formulas (weak logic plus disjunction over preformulas).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum ExtWeakFormula {
    Conj(BTreeSet<ExtWeakFormula>),
    Neg(Box<ExtWeakFormula>),
    WMay { act: ActLabel, body: Box<ExtWeakFormula> },
    WTau(Box<Preformula>),
}

/// Preformulas: the scope of unguarded state predicates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Preformula {
    And(ExtWeakFormula, Box<Preformula>),
    Pred(PredId),
    Disj(BTreeSet<Preformula>),
}

impl ExtWeakFormula {
    pub fn top() -> ExtWeakFormula {
        ExtWeakFormula::Conj(BTreeSet::new())
    }

    pub fn neg(self) -> ExtWeakFormula {
        ExtWeakFormula::Neg(Box::new(self))
    }

    pub fn wmay(act: ActLabel, body: ExtWeakFormula) -> ExtWeakFormula {
        ExtWeakFormula::WMay { act, body: Box::new(body) }
    }

    pub fn wtau(pre: Preformula) -> ExtWeakFormula {
        ExtWeakFormula::WTau(Box::new(pre))
    }

    /// Embed a weak formula (no preformula disjunction is introduced).
    pub fn from_weak(w: &WeakFormula) -> ExtWeakFormula {
        match w {
            WeakFormula::Conj(items) => {
                ExtWeakFormula::Conj(items.iter().map(ExtWeakFormula::from_weak).collect())
            }
            WeakFormula::Neg(inner) => ExtWeakFormula::from_weak(inner).neg(),
            WeakFormula::WMay { act, body } => {
                ExtWeakFormula::wmay(act.clone(), ExtWeakFormula::from_weak(body))
            }
            WeakFormula::TauPred { body, pred } => ExtWeakFormula::wtau(Preformula::And(
                ExtWeakFormula::from_weak(body),
                Box::new(Preformula::Pred(*pred)),
            )),
        }
    }
}

/// Effect-consequence formulas: `A ::= ⋀A | ¬A | ⟨f⟩φ | ⟨f⟩⟨α⟩A`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum FlFormula {
    Conj(BTreeSet<FlFormula>),
    Neg(Box<FlFormula>),
    /// `⟨f⟩φ`: the predicate holds after applying the effect.
    EffPred { eff: crate::effects::EffectId, pred: PredId },
    /// `⟨f⟩⟨α⟩A`: after the effect, the action is possible with continuation.
    EffMay { eff: crate::effects::EffectId, act: ActLabel, body: Box<FlFormula> },
}

impl FlFormula {
    pub fn top() -> FlFormula {
        FlFormula::Conj(BTreeSet::new())
    }

    pub fn neg(self) -> FlFormula {
        FlFormula::Neg(Box::new(self))
    }

    pub fn conj(items: impl IntoIterator<Item = FlFormula>) -> FlFormula {
        FlFormula::Conj(items.into_iter().collect())
    }
}
