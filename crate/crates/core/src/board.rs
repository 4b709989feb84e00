//! Public bulletin board shared by all organizations.

use std::collections::BTreeMap;

use crate::algebra::G1Element;
use crate::error::{Error, Result};
use crate::hierarchy::RoleId;
use crate::so_rbe::{PublicParams, RolePublicKey};

/// Per-organization public registry. Removing a user's public key is the
/// revocation primitive; reads after a removal never see the key.
#[derive(Clone, Debug, Default)]
pub struct BulletinBoard {
    params: BTreeMap<String, PublicParams>,
    role_keys: BTreeMap<RoleId, RolePublicKey>,
    users: BTreeMap<(String, String), G1Element>,
}

impl BulletinBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish_params(&mut self, pp: PublicParams) {
        self.params.insert(pp.org().to_string(), pp);
    }

    pub fn params(&self, org: &str) -> Result<&PublicParams> {
        self.params
            .get(org)
            .ok_or_else(|| Error::Protocol(format!("no public parameters for organization {org}")))
    }

    pub fn publish_role_key(&mut self, rpk: RolePublicKey) {
        self.role_keys.insert(rpk.role().clone(), rpk);
    }

    pub fn role_key(&self, role: &RoleId) -> Result<&RolePublicKey> {
        self.role_keys
            .get(role)
            .ok_or_else(|| Error::UnknownRole(role.to_string()))
    }

    pub fn publish_user(&mut self, org: &str, user: &str, public_key: G1Element) {
        self.users
            .insert((org.to_string(), user.to_string()), public_key);
    }

    /// The user's public key, or `RevokedUser` when it is not on the board.
    pub fn user_public_key(&self, org: &str, user: &str) -> Result<&G1Element> {
        self.users
            .get(&(org.to_string(), user.to_string()))
            .ok_or_else(|| Error::RevokedUser(format!("{org}:{user}")))
    }

    pub fn has_user(&self, org: &str, user: &str) -> bool {
        self.users.contains_key(&(org.to_string(), user.to_string()))
    }

    /// Removes the user's public key.
    pub fn remove_user(&mut self, org: &str, user: &str) -> Result<G1Element> {
        self.users
            .remove(&(org.to_string(), user.to_string()))
            .ok_or_else(|| Error::UnknownUser(format!("{org}:{user}")))
    }
}
