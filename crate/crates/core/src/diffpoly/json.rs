//! JSON wire form of differential polynomials.
//!
//! ```json
//! {
//!   "alphabet": "qr",
//!   "terms": [
//!     {
//!       "coeff": {"re_num": 0, "re_den": 1, "im_num": -1, "im_den": 8},
//!       "powers": [["q", 0, 1], ["r", 2, 1]]
//!     }
//!   ]
//! }
//! ```
//!
//! Each `powers` entry is `[variable, order, multiplicity]`. Terms serialize
//! in canonical order, so equal polynomials produce identical bytes.
//! Deserialization accepts duplicate power entries (multiplicities add) and
//! drops explicit zero coefficients, then re-canonicalizes.

use super::{Alphabet, DerivativeSlot, DiffPolynomial, MonomialKey, Var};
use crate::rational::GaussianRational;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn alphabet_tag(a: Alphabet) -> &'static str {
    match a {
        Alphabet::QR => "qr",
        Alphabet::U => "u",
    }
}

fn alphabet_from_tag(tag: &str) -> Option<Alphabet> {
    match tag {
        "qr" => Some(Alphabet::QR),
        "u" => Some(Alphabet::U),
        _ => None,
    }
}

fn var_from_name(alphabet: Alphabet, name: &str) -> Option<Var> {
    for var in [Var::Q, Var::R] {
        if alphabet.var_name(var) == name {
            return Some(var);
        }
    }
    None
}

#[derive(Serialize, Deserialize)]
struct WireTerm {
    coeff: GaussianRational,
    powers: Vec<(String, u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct WirePoly {
    alphabet: String,
    terms: Vec<WireTerm>,
}

impl Serialize for DiffPolynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let wire = WirePoly {
            alphabet: alphabet_tag(self.alphabet()).to_owned(),
            terms: self
                .terms
                .iter()
                .map(|(key, coeff)| WireTerm {
                    coeff: coeff.clone(),
                    powers: key
                        .iter()
                        .map(|(slot, mult)| {
                            (
                                self.alphabet().var_name(slot.var).to_owned(),
                                slot.order,
                                *mult,
                            )
                        })
                        .collect(),
                })
                .collect(),
        };
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DiffPolynomial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = WirePoly::deserialize(deserializer)?;
        let alphabet = alphabet_from_tag(&wire.alphabet)
            .ok_or_else(|| D::Error::custom(format!("unknown alphabet {:?}", wire.alphabet)))?;
        let mut poly = DiffPolynomial::zero(alphabet);
        for term in wire.terms {
            let mut key = MonomialKey::one();
            for (name, order, mult) in term.powers {
                let var = var_from_name(alphabet, &name).ok_or_else(|| {
                    D::Error::custom(format!(
                        "variable {name:?} does not belong to the {:?} alphabet",
                        wire.alphabet
                    ))
                })?;
                key.insert(DerivativeSlot::new(var, order), mult);
            }
            poly.add_term(key, term.coeff);
        }
        Ok(poly)
    }
}
