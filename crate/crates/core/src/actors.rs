//! In-process protocol simulator.
//!
//! Six kinds of entity (system administrator, role managers, private cloud,
//! public cloud, data owners, users) plus the bulletin board exchange typed
//! messages in a single-threaded loop. Every message and every local
//! computation is written to a [`Transcript`], which can be audited for
//! secrets that left their home entity.
//!
//! Scripts are line oriented:
//!
//! ```text
//! init-org A
//! add-hierarchy A fig1.txt
//! gen-role-params A
//! register A alice
//! assign A alice r5
//! write msg.txt some text
//! encrypt A r8 msg.txt ct.rbec
//! decrypt A alice r5 ct.rbec [out.txt]
//! revoke A alice
//! link B A                       # B shares its long-term secret with A
//! mencrypt A r4 B r2 msg.txt joint.rbec
//! mdecrypt B bob r2 joint.rbec [out.txt]
//! leak A msk user:A:alice        # synthetic residency violation
//! upload A ct.rbec local.rbec     # put an existing container in cloud storage
//! ```
//!
//! Any command may end in `expect <ErrorName>`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::algebra::{fingerprint, G1Element, GtElement, OpCounts, PairingContext, Scalar};
use crate::board::BulletinBoard;
use crate::envelope::{Container, Kem};
use crate::error::{Error, Result};
use crate::hierarchy::{RoleHierarchy, RoleId};
use crate::mo_rbe::{self, MultiKemCiphertext, ReKeyStore};
use crate::so_rbe::{self, Blinding, KemCiphertext, MasterSecret, PartialDecryption, RoleKey, RoleParams, RoleSecret, TransformedRoleKey};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity {
    SystemAdmin(String),
    RoleManager(RoleId),
    PrivateCloud(String),
    PublicCloud,
    DataOwner(String),
    User(String, String),
    Board,
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::SystemAdmin(o) => write!(f, "SA[{o}]"),
            Entity::RoleManager(r) => write!(f, "RM[{r}]"),
            Entity::PrivateCloud(o) => write!(f, "PC[{o}]"),
            Entity::PublicCloud => f.write_str("PublicCloud"),
            Entity::DataOwner(o) => write!(f, "DO[{o}]"),
            Entity::User(o, u) => write!(f, "User[{o}:{u}]"),
            Entity::Board => f.write_str("Board"),
        }
    }
}

impl Entity {
    /// `sa:A`, `pc:A`, `rm:A:r5`, `user:A:alice`, `do:A`, `public`, `board`
    pub fn parse(s: &str) -> Result<Entity> {
        let parts: Vec<&str> = s.split(':').collect();
        Ok(match parts.as_slice() {
            ["sa", o] => Entity::SystemAdmin(o.to_string()),
            ["pc", o] => Entity::PrivateCloud(o.to_string()),
            ["rm", o, r] => Entity::RoleManager(RoleId::new(*o, *r)),
            ["user", o, u] => Entity::User(o.to_string(), u.to_string()),
            ["do", o] => Entity::DataOwner(o.to_string()),
            ["public"] => Entity::PublicCloud,
            ["board"] => Entity::Board,
            _ => return Err(Error::Protocol(format!("unknown entity {s:?}"))),
        })
    }
}

/// What a message item is. Secret kinds have a residency rule; the rest are
/// public.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ItemKind {
    MasterSecret { org: String },
    RoleParams { org: String },
    Sigma { org: String },
    Eta { org: String },
    GDelta { org: String },
    RoleSecret(RoleId),
    UserSecret { org: String, user: String },
    PrivateKey { org: String, user: String },
    RoleKey { role: RoleId, user: String },
    LongTermSecret { org: String },
    ReKey { host: String, guest: String },
    Blinding { org: String, user: String },

    PublicParams { org: String },
    RolePublicKey(RoleId),
    UserPublicKey { org: String, user: String },
    Hierarchy { org: String },
    Ciphertext { name: String },
    TransformedRoleKey { role: RoleId, user: String },
    PartialDecryption,
    TranslatedC1,
    TemporaryKey { role: RoleId, user: String },
    Revocation { org: String, user: String },
    Request(String),
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ItemKind::*;
        match self {
            MasterSecret { org } => write!(f, "MasterSecret({org})"),
            RoleParams { org } => write!(f, "RoleParams({org})"),
            Sigma { org } => write!(f, "Sigma({org})"),
            Eta { org } => write!(f, "Eta({org})"),
            GDelta { org } => write!(f, "GDelta({org})"),
            RoleSecret(r) => write!(f, "RoleSecret({r})"),
            UserSecret { org, user } => write!(f, "UserSecret({org}:{user})"),
            PrivateKey { org, user } => write!(f, "PrivateKey({org}:{user})"),
            RoleKey { role, user } => write!(f, "RoleKey({role},{user})"),
            LongTermSecret { org } => write!(f, "LongTermSecret({org})"),
            ReKey { host, guest } => write!(f, "ReKey({host}<-{guest})"),
            Blinding { org, user } => write!(f, "Blinding({org}:{user})"),
            PublicParams { org } => write!(f, "PublicParams({org})"),
            RolePublicKey(r) => write!(f, "RolePublicKey({r})"),
            UserPublicKey { org, user } => write!(f, "UserPublicKey({org}:{user})"),
            Hierarchy { org } => write!(f, "Hierarchy({org})"),
            Ciphertext { name } => write!(f, "Ciphertext({name})"),
            TransformedRoleKey { role, user } => write!(f, "TransformedRoleKey({role},{user})"),
            PartialDecryption => f.write_str("PartialDecryption"),
            TranslatedC1 => f.write_str("TranslatedC1"),
            TemporaryKey { role, user } => write!(f, "TemporaryKey({role},{user})"),
            Revocation { org, user } => write!(f, "Revocation({org}:{user})"),
            Request(r) => write!(f, "Request({r})"),
        }
    }
}

/// `Some(true)` if `e` may hold the secret, `Some(false)` if not, `None` for
/// public items.
pub fn residency_allows(kind: &ItemKind, e: &Entity) -> Option<bool> {
    use Entity as E;
    use ItemKind as K;
    let sa = |org: &str| matches!(e, E::SystemAdmin(o) if o == org);
    let pc = |org: &str| matches!(e, E::PrivateCloud(o) if o == org);
    let any_rm = |org: &str| matches!(e, E::RoleManager(r) if r.org() == org);
    Some(match kind {
        K::MasterSecret { org } | K::RoleParams { org } => sa(org),
        K::Sigma { org } | K::Eta { org } => sa(org) || pc(org),
        K::GDelta { org } => sa(org) || any_rm(org),
        K::RoleSecret(role) => sa(role.org()) || matches!(e, E::RoleManager(r) if r == role),
        K::UserSecret { org, .. } => sa(org) || pc(org) || any_rm(org),
        K::PrivateKey { org, user } => sa(org) || matches!(e, E::User(o, u) if o == org && u == user),
        K::RoleKey { role, user } => {
            matches!(e, E::RoleManager(r) if r == role)
                || matches!(e, E::User(o, u) if o == role.org() && u == user)
        }
        K::LongTermSecret { .. } => matches!(e, E::SystemAdmin(_)),
        K::ReKey { host, .. } => sa(host) || pc(host),
        K::Blinding { org, user } => matches!(e, E::User(o, u) if o == org && u == user),
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub kind: ItemKind,
    pub fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub from: Entity,
    pub to: Entity,
    pub items: Vec<Item>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Message(Message),
    Compute { entity: Entity, what: String, counts: OpCounts },
    SessionPut(Entity),
    SessionClear(Entity),
    Note(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Plaintext { fingerprint: String, len: usize },
    ExpectedError(String),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub line: usize,
    pub command: String,
    pub events: Vec<Event>,
    pub outcome: Outcome,
}

impl StepRecord {
    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.events.iter().filter_map(|e| match e {
            Event::Message(m) => Some(m),
            _ => None,
        })
    }

    /// Operation counts of every computation performed by `entity`.
    pub fn counts_for(&self, entity: &Entity) -> OpCounts {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Compute { entity: who, counts, .. } if who == entity => Some(*counts),
                _ => None,
            })
            .fold(OpCounts::default(), |a, b| a + b)
    }

    /// Counts summed over all entities.
    pub fn total_counts(&self) -> OpCounts {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Compute { counts, .. } => Some(*counts),
                _ => None,
            })
            .fold(OpCounts::default(), |a, b| a + b)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
}

impl Transcript {
    pub fn to_text(&self) -> String {
        let mut out = format!("transcript seed={}\n", self.seed);
        for (i, s) in self.steps.iter().enumerate() {
            out.push_str(&format!("step {} line {}: {}\n", i + 1, s.line, s.command));
            for e in &s.events {
                match e {
                    Event::Message(m) => {
                        let items: Vec<String> =
                            m.items.iter().map(|it| format!("{}#{}", it.kind, it.fingerprint)).collect();
                        out.push_str(&format!("  msg {} -> {}: {}\n", m.from, m.to, items.join(", ")));
                    }
                    Event::Compute { entity, what, counts } => {
                        out.push_str(&format!("  compute {entity} {what}: {counts}\n"))
                    }
                    Event::SessionPut(e) => out.push_str(&format!("  session-put {e}\n")),
                    Event::SessionClear(e) => out.push_str(&format!("  session-clear {e}\n")),
                    Event::Note(n) => out.push_str(&format!("  note {n}\n")),
                }
            }
            let outcome = match &s.outcome {
                Outcome::Ok => "ok".to_string(),
                Outcome::Plaintext { fingerprint, len } => format!("plaintext {len} bytes #{fingerprint}"),
                Outcome::ExpectedError(e) => format!("expected error {e}"),
                Outcome::Failed(e) => format!("failed: {e}"),
            };
            out.push_str(&format!("  => {outcome}\n"));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub step: usize,
    pub description: String,
}

/// Lists every message item that reached, or came from, an entity outside
/// the item's residency set, and every blinding session never cleared.
pub fn audit_secret_residency(t: &Transcript) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut open: BTreeMap<Entity, usize> = BTreeMap::new();
    for (i, step) in t.steps.iter().enumerate() {
        for e in &step.events {
            match e {
                Event::Message(m) => {
                    for it in &m.items {
                        let bad: Vec<&Entity> = [&m.from, &m.to]
                            .into_iter()
                            .filter(|e| residency_allows(&it.kind, e) == Some(false))
                            .collect();
                        if !bad.is_empty() {
                            out.push(Violation {
                                step: i + 1,
                                description: format!(
                                    "{} sent {} -> {} (not resident at {})",
                                    it.kind,
                                    m.from,
                                    m.to,
                                    bad.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
                                ),
                            });
                        }
                    }
                }
                Event::SessionPut(e) => {
                    open.insert(e.clone(), i + 1);
                }
                Event::SessionClear(e) => {
                    open.remove(e);
                }
                _ => {}
            }
        }
    }
    for (e, step) in open {
        out.push(Violation {
            step,
            description: format!("blinding session of {e} never cleared"),
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Uninitialized,
    Initialized,
    HierarchyLoaded,
    Operational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    InitOrg,
    AddHierarchy,
    GenRoleParams,
    Register,
    Assign,
    Encrypt,
    Decrypt,
    Revoke,
    Link,
    MultiEncrypt,
    MultiDecrypt,
}

impl Phase {
    /// Transition of one organization's phase automaton.
    pub fn next(self, step: Step) -> Result<Phase> {
        use Phase::*;
        use Step::*;
        match (self, step) {
            (Uninitialized, InitOrg) => Ok(Initialized),
            (Initialized, AddHierarchy) => Ok(HierarchyLoaded),
            (HierarchyLoaded, GenRoleParams) => Ok(Operational),
            (Initialized | HierarchyLoaded | Operational, Register | Revoke | Link) => Ok(self),
            (Operational, Assign | Encrypt | Decrypt | MultiEncrypt | MultiDecrypt) => Ok(self),
            _ => Err(Error::Protocol(format!("{step:?} is not allowed in phase {self:?}"))),
        }
    }
}

/// Decides whether `entity` may act for `user`. The stub accepts exactly the
/// users whose public key is on the board.
pub trait Authenticator {
    fn authenticate(&self, board: &BulletinBoard, org: &str, user: &str, entity: &Entity) -> bool;
}

pub struct StubAuthenticator;

impl Authenticator for StubAuthenticator {
    fn authenticate(&self, board: &BulletinBoard, org: &str, user: &str, _entity: &Entity) -> bool {
        board.has_user(org, user)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptError {
    pub line: usize,
    pub command: String,
    pub error: Error,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} ({}): {}", self.line, self.command, self.error)
    }
}

impl std::error::Error for ScriptError {}

#[derive(Default)]
struct SaState {
    msk: Option<MasterSecret>,
    params: Option<RoleParams>,
    g_delta: Option<G1Element>,
    hierarchy: Option<RoleHierarchy>,
    registered: BTreeSet<String>,
}

#[derive(Default)]
struct PcState {
    sigma: Option<Scalar>,
    eta: Option<Scalar>,
    user_secrets: BTreeMap<String, G1Element>,
    rekeys: ReKeyStore,
}

struct RmState {
    g_delta: G1Element,
    rs: RoleSecret,
}

struct UserState {
    u: Scalar,
    role_keys: BTreeMap<RoleId, RoleKey>,
    session: Option<Blinding>,
}

struct OrgState {
    phase: Phase,
    sa: SaState,
    pc: PcState,
    rms: BTreeMap<RoleId, RmState>,
    users: BTreeMap<String, UserState>,
}

#[derive(Default)]
struct PublicCloudState {
    hierarchies: BTreeMap<String, RoleHierarchy>,
    storage: BTreeMap<String, Vec<u8>>,
}

pub struct Simulator {
    ctx: PairingContext,
    rng: ChaCha20Rng,
    seed: u64,
    board: BulletinBoard,
    orgs: BTreeMap<String, OrgState>,
    cloud: PublicCloudState,
    files: BTreeMap<String, Vec<u8>>,
    base_dir: Option<PathBuf>,
    auth: Box<dyn Authenticator>,
    transcript: Transcript,
    events: Vec<Event>,
}

fn item(kind: ItemKind, bytes: &[u8]) -> Item {
    Item {
        kind,
        fingerprint: fingerprint(bytes),
    }
}

fn pd_bytes(pd: &PartialDecryption) -> Vec<u8> {
    let mut b = pd.p.to_bytes();
    b.extend(pd.q.to_bytes());
    b
}

impl Simulator {
    pub fn new(seed: u64) -> Result<Self> {
        Ok(Simulator {
            ctx: crate::algebra::setup_pairing(128)?,
            rng: ChaCha20Rng::seed_from_u64(seed),
            seed,
            board: BulletinBoard::new(),
            orgs: BTreeMap::new(),
            cloud: PublicCloudState::default(),
            files: BTreeMap::new(),
            base_dir: None,
            auth: Box::new(StubAuthenticator),
            transcript: Transcript {
                seed,
                steps: Vec::new(),
            },
            events: Vec::new(),
        })
    }

    pub fn context(&self) -> &PairingContext {
        &self.ctx
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn board(&self) -> &BulletinBoard {
        &self.board
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    /// Files not found in the in-memory store are read relative to `dir`.
    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = Some(dir.into());
    }

    pub fn set_authenticator(&mut self, auth: Box<dyn Authenticator>) {
        self.auth = auth;
    }

    pub fn put_file(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.to_string(), bytes.into());
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn files(&self) -> &BTreeMap<String, Vec<u8>> {
        &self.files
    }

    pub fn hierarchy(&self, org: &str) -> Option<&RoleHierarchy> {
        self.orgs.get(org).and_then(|o| o.sa.hierarchy.as_ref())
    }

    pub fn authenticate(&self, org: &str, user: &str, entity: &Entity) -> bool {
        self.auth.authenticate(&self.board, org, user, entity)
    }

    pub fn phase(&self, org: &str) -> Phase {
        self.orgs.get(org).map_or(Phase::Uninitialized, |o| o.phase)
    }

    /// Runs every line of `script`, stopping at the first unexpected error.
    pub fn run_script(&mut self, script: &str) -> std::result::Result<(), ScriptError> {
        for (n, raw) in script.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.run_line(n + 1, line)?;
        }
        Ok(())
    }

    /// Runs a single command and records it as one transcript step.
    pub fn run_line(&mut self, line_no: usize, line: &str) -> std::result::Result<(), ScriptError> {
        let mut words: Vec<&str> = line.split_whitespace().collect();
        let expected = match words.as_slice() {
            [.., "expect", name] => {
                let name = name.to_string();
                words.truncate(words.len() - 2);
                Some(name)
            }
            _ => None,
        };
        self.events.clear();
        let result = self.dispatch(&words, line);
        let events = std::mem::take(&mut self.events);
        let (outcome, err) = match (result, expected) {
            (Ok(o), None) => (o, None),
            (Ok(_), Some(name)) => {
                let e = Error::Protocol(format!("expected {name} but the step succeeded"));
                (Outcome::Failed(e.to_string()), Some(e))
            }
            (Err(e), Some(name)) if e.name() == name => (Outcome::ExpectedError(e.to_string()), None),
            (Err(e), _) => (Outcome::Failed(e.to_string()), Some(e)),
        };
        self.transcript.steps.push(StepRecord {
            line: line_no,
            command: line.to_string(),
            events,
            outcome,
        });
        match err {
            None => Ok(()),
            Some(error) => Err(ScriptError {
                line: line_no,
                command: line.to_string(),
                error,
            }),
        }
    }

    fn dispatch(&mut self, w: &[&str], line: &str) -> Result<Outcome> {
        match w {
            ["init-org", org] => self.init_org(org),
            ["add-hierarchy", org, file] => self.add_hierarchy(org, file),
            ["gen-role-params", org] => self.gen_role_params(org),
            ["register", org, user] => self.register(org, user),
            ["assign", org, user, role] => self.assign(org, user, role),
            ["write", name, ..] => {
                let body = line
                    .splitn(3, char::is_whitespace)
                    .nth(2)
                    .unwrap_or("")
                    .trim_start();
                self.put_file(name, body.as_bytes());
                Ok(Outcome::Ok)
            }
            ["encrypt", org, role, input, output] => self.encrypt(org, role, input, output),
            ["decrypt", org, user, role, ct] => self.decrypt(org, user, role, ct, None, Step::Decrypt),
            ["decrypt", org, user, role, ct, out] => self.decrypt(org, user, role, ct, Some(out), Step::Decrypt),
            ["revoke", org, user] => self.revoke(org, user),
            ["link", from, to] => self.link(from, to),
            ["mencrypt", host, role, guest, grole, input, output] => {
                self.mencrypt(host, role, guest, grole, input, output)
            }
            ["mdecrypt", org, user, role, ct] => self.decrypt(org, user, role, ct, None, Step::MultiDecrypt),
            ["mdecrypt", org, user, role, ct, out] => {
                self.decrypt(org, user, role, ct, Some(out), Step::MultiDecrypt)
            }
            ["leak", org, secret, to] => self.leak(org, secret, to),
            ["upload", org, name, file] => {
                self.org(org)?;
                let bytes = self.read_file(file)?;
                self.store(Entity::DataOwner(org.to_string()), name, bytes);
                Ok(Outcome::Ok)
            }
            _ => Err(Error::Protocol(format!("unrecognized command {line:?}"))),
        }
    }

    fn event(&mut self, e: Event) {
        self.events.push(e);
    }

    fn send(&mut self, from: Entity, to: Entity, items: Vec<Item>) {
        self.events.push(Event::Message(Message { from, to, items }));
    }

    fn measured<T>(&mut self, entity: Entity, what: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let before = self.ctx.counter().snapshot();
        let out = f(self);
        let counts = self.ctx.counter().snapshot() - before;
        self.event(Event::Compute {
            entity,
            what: what.to_string(),
            counts,
        });
        out
    }

    fn check_phase(&self, org: &str, step: Step) -> Result<Phase> {
        self.phase(org).next(step)
    }

    fn org(&self, org: &str) -> Result<&OrgState> {
        self.orgs
            .get(org)
            .ok_or_else(|| Error::Protocol(format!("organization {org} is not initialized")))
    }

    fn org_mut(&mut self, org: &str) -> Result<&mut OrgState> {
        self.orgs
            .get_mut(org)
            .ok_or_else(|| Error::Protocol(format!("organization {org} is not initialized")))
    }

    fn read_file(&self, name: &str) -> Result<Vec<u8>> {
        if let Some(b) = self.files.get(name) {
            return Ok(b.clone());
        }
        match &self.base_dir {
            Some(dir) => Ok(std::fs::read(dir.join(name))?),
            None => Err(Error::Io(format!("no such file: {name}"))),
        }
    }

    fn init_org(&mut self, org: &str) -> Result<Outcome> {
        let next = self.check_phase(org, Step::InitOrg)?;
        let sa = Entity::SystemAdmin(org.to_string());
        let (msk, pp, g_delta) = self.measured(sa.clone(), "init", |s| so_rbe::init(&s.ctx, org, &mut s.rng))?;
        self.board.publish_params(pp.clone());
        let mut pp_bytes = pp.y_pub().to_bytes();
        pp_bytes.extend(pp.v_pub().to_bytes());
        pp_bytes.extend(pp.h().to_bytes());
        self.send(sa.clone(), Entity::Board, vec![item(ItemKind::PublicParams { org: org.into() }, &pp_bytes)]);
        self.send(
            sa,
            Entity::PrivateCloud(org.into()),
            vec![
                item(ItemKind::Sigma { org: org.into() }, &msk.sigma().to_be_bytes()),
                item(ItemKind::Eta { org: org.into() }, &msk.eta().to_be_bytes()),
            ],
        );
        let pc = PcState {
            sigma: Some(msk.sigma()),
            eta: Some(msk.eta()),
            user_secrets: BTreeMap::new(),
            rekeys: ReKeyStore::new(org),
        };
        self.orgs.insert(
            org.to_string(),
            OrgState {
                phase: next,
                sa: SaState {
                    msk: Some(msk),
                    g_delta: Some(g_delta),
                    ..SaState::default()
                },
                pc,
                rms: BTreeMap::new(),
                users: BTreeMap::new(),
            },
        );
        Ok(Outcome::Ok)
    }

    fn add_hierarchy(&mut self, org: &str, file: &str) -> Result<Outcome> {
        let next = self.check_phase(org, Step::AddHierarchy)?;
        let text = String::from_utf8(self.read_file(file)?)
            .map_err(|_| Error::Decode(format!("{file} is not UTF-8")))?;
        let h = RoleHierarchy::parse(org, &text)?;
        for w in h.warnings() {
            self.event(Event::Note(format!("warning: {w}")));
        }
        self.send(
            Entity::SystemAdmin(org.into()),
            Entity::PublicCloud,
            vec![item(ItemKind::Hierarchy { org: org.into() }, h.to_text().as_bytes())],
        );
        self.cloud.hierarchies.insert(org.to_string(), h.clone());
        let o = self.org_mut(org)?;
        o.sa.hierarchy = Some(h);
        o.phase = next;
        Ok(Outcome::Ok)
    }

    fn gen_role_params(&mut self, org: &str) -> Result<Outcome> {
        let next = self.check_phase(org, Step::GenRoleParams)?;
        let pp = self.board.params(org)?.clone();
        let h = self.org(org)?.sa.hierarchy.clone().expect("phase guarantees a hierarchy");
        let sa = Entity::SystemAdmin(org.to_string());
        let (params, rpks, rss) =
            self.measured(sa.clone(), "role-para-gen", |s| so_rbe::role_para_gen(&s.ctx, &pp, &h, &mut s.rng))?;
        let g_delta = self.org(org)?.sa.g_delta.clone().expect("set at init");
        for rpk in rpks.values() {
            let mut b = rpk.pk().to_bytes();
            for ar in rpk.ar().values() {
                b.extend(ar.to_bytes());
            }
            self.send(sa.clone(), Entity::Board, vec![item(ItemKind::RolePublicKey(rpk.role().clone()), &b)]);
            self.board.publish_role_key(rpk.clone());
        }
        let mut rms = BTreeMap::new();
        for (role, rs) in rss {
            self.send(
                sa.clone(),
                Entity::RoleManager(role.clone()),
                vec![
                    item(ItemKind::RoleSecret(role.clone()), &rs.value().to_be_bytes()),
                    item(ItemKind::GDelta { org: org.into() }, &g_delta.to_bytes()),
                ],
            );
            rms.insert(
                role,
                RmState {
                    g_delta: g_delta.clone(),
                    rs,
                },
            );
        }
        let o = self.org_mut(org)?;
        o.sa.params = Some(params);
        o.rms = rms;
        o.phase = next;
        Ok(Outcome::Ok)
    }

    fn register(&mut self, org: &str, user: &str) -> Result<Outcome> {
        self.check_phase(org, Step::Register)?;
        if self.org(org)?.sa.registered.contains(user) {
            return Err(Error::Protocol(format!("{org}:{user} is already registered")));
        }
        let pp = self.board.params(org)?.clone();
        let sa = Entity::SystemAdmin(org.to_string());
        let cred = self.measured(sa.clone(), "priv-key-gen", |s| {
            let msk = s.orgs[org].sa.msk.as_ref().expect("set at init");
            so_rbe::priv_key_gen(&s.ctx, &pp, msk, user, &mut s.rng)
        })?;
        let ue = Entity::User(org.into(), user.into());
        let pub_item = || item(ItemKind::UserPublicKey { org: org.into(), user: user.into() }, &cred.public_key().to_bytes());
        self.send(
            sa.clone(),
            ue,
            vec![
                item(ItemKind::PrivateKey { org: org.into(), user: user.into() }, &cred.private_key().to_be_bytes()),
                pub_item(),
            ],
        );
        self.send(sa.clone(), Entity::Board, vec![pub_item()]);
        self.send(
            sa,
            Entity::PrivateCloud(org.into()),
            vec![item(ItemKind::UserSecret { org: org.into(), user: user.into() }, &cred.user_secret().to_bytes())],
        );
        self.board.publish_user(org, user, cred.public_key().clone());
        let o = self.org_mut(org)?;
        o.sa.registered.insert(user.to_string());
        o.pc.user_secrets.insert(user.to_string(), cred.user_secret().clone());
        o.users.insert(
            user.to_string(),
            UserState {
                u: cred.private_key(),
                role_keys: BTreeMap::new(),
                session: None,
            },
        );
        Ok(Outcome::Ok)
    }

    fn assign(&mut self, org: &str, user: &str, role: &str) -> Result<Outcome> {
        self.check_phase(org, Step::Assign)?;
        let role_id = self.org(org)?.sa.hierarchy.as_ref().expect("operational").role(role)?;
        if !self.org(org)?.users.contains_key(user) {
            return Err(Error::UnknownUser(format!("{org}:{user}")));
        }
        let ue = Entity::User(org.into(), user.into());
        let rm = Entity::RoleManager(role_id.clone());
        self.send(ue.clone(), rm.clone(), vec![item(ItemKind::Request(format!("assign {role}")), format!("{org}:{user}:{role}").as_bytes())]);
        if !self.authenticate(org, user, &rm) {
            return Err(Error::AuthenticationRejected(format!("{org}:{user}")));
        }
        let us = self.org(org)?.pc.user_secrets.get(user).cloned().ok_or_else(|| Error::UnknownUser(format!("{org}:{user}")))?;
        self.send(
            Entity::PrivateCloud(org.into()),
            rm.clone(),
            vec![item(ItemKind::UserSecret { org: org.into(), user: user.into() }, &us.to_bytes())],
        );
        let pp = self.board.params(org)?.clone();
        let rk = self.measured(rm.clone(), "role-key-gen", |s| {
            let st = &s.orgs[org].rms[&role_id];
            so_rbe::role_key_gen(&s.ctx, &pp, &st.rs, &st.g_delta, &us, user, &role_id)
        })?;
        self.send(
            rm,
            ue,
            vec![item(ItemKind::RoleKey { role: role_id.clone(), user: user.into() }, &rk.element().to_bytes())],
        );
        self.org_mut(org)?
            .users
            .get_mut(user)
            .expect("checked above")
            .role_keys
            .insert(role_id, rk);
        Ok(Outcome::Ok)
    }

    fn encrypt(&mut self, org: &str, role: &str, input: &str, output: &str) -> Result<Outcome> {
        self.check_phase(org, Step::Encrypt)?;
        let msg = self.read_file(input)?;
        let pp = self.board.params(org)?.clone();
        let rpk = self.board.role_key(&RoleId::new(org, role))?.clone();
        let owner = Entity::DataOwner(org.to_string());
        self.send(
            Entity::Board,
            owner.clone(),
            vec![
                item(ItemKind::PublicParams { org: org.into() }, &pp.h().to_bytes()),
                item(ItemKind::RolePublicKey(rpk.role().clone()), &rpk.pk().to_bytes()),
            ],
        );
        let container = self.measured(owner.clone(), "encrypt", |s| {
            let (k, kem) = so_rbe::kem_encrypt(&s.ctx, &pp, &rpk, &mut s.rng)?;
            Ok(Container::seal(Kem::Single(kem), &k, &msg, &mut s.rng))
        })?;
        self.store(owner, output, container.encode());
        Ok(Outcome::Ok)
    }

    fn mencrypt(
        &mut self,
        host: &str,
        role: &str,
        guest: &str,
        grole: &str,
        input: &str,
        output: &str,
    ) -> Result<Outcome> {
        self.check_phase(host, Step::MultiEncrypt)?;
        self.check_phase(guest, Step::MultiEncrypt)?;
        let msg = self.read_file(input)?;
        let pp_h = self.board.params(host)?.clone();
        let pp_g = self.board.params(guest)?.clone();
        let rpk_h = self.board.role_key(&RoleId::new(host, role))?.clone();
        let rpk_g = self.board.role_key(&RoleId::new(guest, grole))?.clone();
        let owner = Entity::DataOwner(host.to_string());
        self.send(
            Entity::Board,
            owner.clone(),
            vec![
                item(ItemKind::PublicParams { org: host.into() }, &pp_h.h().to_bytes()),
                item(ItemKind::PublicParams { org: guest.into() }, &pp_g.h().to_bytes()),
                item(ItemKind::RolePublicKey(rpk_h.role().clone()), &rpk_h.pk().to_bytes()),
                item(ItemKind::RolePublicKey(rpk_g.role().clone()), &rpk_g.pk().to_bytes()),
            ],
        );
        let joint = self.measured(owner.clone(), "role-pub-key-update", |_| mo_rbe::role_pub_key_update(&rpk_h, &rpk_g))?;
        let container = self.measured(owner.clone(), "multi-encrypt", |s| {
            let (k, kem) = mo_rbe::multi_kem_encrypt(&s.ctx, &pp_h, &pp_g, &joint, &mut s.rng)?;
            Ok(Container::seal(Kem::Multi(kem), &k, &msg, &mut s.rng))
        })?;
        self.store(owner, output, container.encode());
        Ok(Outcome::Ok)
    }

    fn store(&mut self, owner: Entity, name: &str, bytes: Vec<u8>) {
        self.send(owner, Entity::PublicCloud, vec![item(ItemKind::Ciphertext { name: name.into() }, &bytes)]);
        self.cloud.storage.insert(name.to_string(), bytes.clone());
        self.files.insert(name.to_string(), bytes);
    }

    #[allow(clippy::too_many_arguments)]
    fn decrypt(
        &mut self,
        org: &str,
        user: &str,
        role: &str,
        name: &str,
        out: Option<&str>,
        step: Step,
    ) -> Result<Outcome> {
        self.check_phase(org, step)?;
        let bytes = self
            .cloud
            .storage
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Protocol(format!("no ciphertext named {name} in cloud storage")))?;
        let container = Container::decode(&self.ctx, &bytes)?;
        let role_id = RoleId::new(org, role);
        let state = self
            .org(org)?
            .users
            .get(user)
            .ok_or_else(|| Error::UnknownUser(format!("{org}:{user}")))?;
        let rk = state
            .role_keys
            .get(&role_id)
            .cloned()
            .ok_or_else(|| Error::KeyMismatch(format!("{org}:{user} holds no key for role {role_id}")))?;
        let u = state.u;
        let ue = Entity::User(org.into(), user.into());

        let trk = self.measured(ue.clone(), "transform-role-key", |s| {
            let (trk, v) = so_rbe::transform_role_key(&s.ctx, &rk, &mut s.rng)?;
            s.orgs.get_mut(org).expect("checked").users.get_mut(user).expect("checked").session = Some(v);
            Ok(trk)
        })?;
        self.event(Event::SessionPut(ue.clone()));
        self.send(
            ue.clone(),
            Entity::PublicCloud,
            vec![
                item(ItemKind::Request(format!("decrypt {name}")), name.as_bytes()),
                item(ItemKind::TransformedRoleKey { role: role_id.clone(), user: user.into() }, &trk.trk.to_bytes()),
            ],
        );

        let cloud_result = match &container.kem {
            Kem::Single(ct) => self.so_cloud(ct, &trk),
            Kem::Multi(m) if m.host_org() == org => self.so_cloud(&m.host_view(), &trk),
            Kem::Multi(m) => self.mo_cloud(m, &trk),
        };
        let blinding = self
            .orgs
            .get_mut(org)
            .expect("checked")
            .users
            .get_mut(user)
            .expect("checked")
            .session
            .take()
            .expect("session was just stored");
        let (c1, pd) = match cloud_result {
            Ok(r) => r,
            Err(e) => {
                drop(blinding);
                self.event(Event::SessionClear(ue));
                return Err(e);
            }
        };
        let mut reply = vec![
            item(ItemKind::Ciphertext { name: name.into() }, &bytes),
            item(ItemKind::PartialDecryption, &pd_bytes(&pd)),
        ];
        if c1 != *container.kem.c1() {
            reply.push(item(ItemKind::TranslatedC1, &c1.to_bytes()));
        }
        self.send(Entity::PublicCloud, ue.clone(), reply);
        let plain = self.measured(ue.clone(), "finalize", |s| {
            let k = so_rbe::user_finalize(&s.ctx, &c1, &pd, blinding, &u)?;
            container.open(&k)
        });
        self.event(Event::SessionClear(ue));
        let plain = plain?;
        if let Some(out) = out {
            self.files.insert(out.to_string(), plain.clone());
        }
        Ok(Outcome::Plaintext {
            fingerprint: fingerprint(&plain),
            len: plain.len(),
        })
    }

    fn so_cloud(&mut self, ct: &KemCiphertext, trk: &TransformedRoleKey) -> Result<(GtElement, PartialDecryption)> {
        let pd = self.measured(Entity::PublicCloud, "partial-dec", |s| {
            let h = s
                .cloud
                .hierarchies
                .get(ct.org())
                .ok_or_else(|| Error::Protocol(format!("no hierarchy for {}", ct.org())))?;
            so_rbe::cloud_partial_dec(&s.ctx, &s.board, ct, trk, h)
        })?;
        Ok((ct.c1.clone(), pd))
    }

    fn mo_cloud(&mut self, m: &MultiKemCiphertext, trk: &TransformedRoleKey) -> Result<(GtElement, PartialDecryption)> {
        let host = m.host_org().to_string();
        let requester = trk.role.org().to_string();
        let host_pc = Entity::PrivateCloud(host.clone());
        let mut c12 = m.c1.to_bytes();
        c12.extend(m.c2.to_bytes());
        self.send(
            Entity::PublicCloud,
            host_pc.clone(),
            vec![
                item(ItemKind::Request(format!("translate for {requester}")), requester.as_bytes()),
                item(ItemKind::Ciphertext { name: "C1,C2".into() }, &c12),
            ],
        );
        let c1p = self.measured(host_pc.clone(), "translate-c1", |s| {
            let pc = &s.org(&host)?.pc;
            let eta = pc.eta.expect("set at init");
            mo_rbe::translate_c1(&s.ctx, &pc.rekeys, &requester, &m.c1, &m.c2, &eta)
        })?;
        self.send(host_pc, Entity::PublicCloud, vec![item(ItemKind::TranslatedC1, &c1p.to_bytes())]);
        if requester != m.guest_org() {
            return Err(Error::UnauthorizedRole {
                held: trk.role.to_string(),
                target: m.guest.role.to_string(),
            });
        }
        let guest_pc = Entity::PrivateCloud(requester.clone());
        self.send(
            Entity::PublicCloud,
            guest_pc.clone(),
            vec![item(
                ItemKind::TransformedRoleKey { role: trk.role.clone(), user: trk.user.clone() },
                &trk.trk.to_bytes(),
            )],
        );
        let tdk = self.measured(guest_pc.clone(), "make-tdk", |s| {
            let sigma = s.org(&requester)?.pc.sigma.expect("set at init");
            mo_rbe::make_tdk(&s.ctx, &s.board, trk, &sigma)
        })?;
        let mut tb = tdk.tdk.to_bytes();
        tb.extend(tdk.blinded_pub.to_bytes());
        self.send(
            guest_pc,
            Entity::PublicCloud,
            vec![item(ItemKind::TemporaryKey { role: tdk.role.clone(), user: tdk.user.clone() }, &tb)],
        );
        let pd = self.measured(Entity::PublicCloud, "multi-partial-dec", |s| {
            let h = s
                .cloud
                .hierarchies
                .get(&requester)
                .ok_or_else(|| Error::Protocol(format!("no hierarchy for {requester}")))?;
            mo_rbe::multi_cloud_partial_dec(&s.ctx, m, &tdk, h)
        })?;
        Ok((c1p, pd))
    }

    fn revoke(&mut self, org: &str, user: &str) -> Result<Outcome> {
        self.check_phase(org, Step::Revoke)?;
        let sa = Entity::SystemAdmin(org.to_string());
        self.send(
            sa,
            Entity::Board,
            vec![item(ItemKind::Revocation { org: org.into(), user: user.into() }, format!("{org}:{user}").as_bytes())],
        );
        self.board.remove_user(org, user)?;
        Ok(Outcome::Ok)
    }

    /// `from` shares its long-term secret with `to`; afterwards users of
    /// `from` can read data hosted by `to`.
    fn link(&mut self, from: &str, to: &str) -> Result<Outcome> {
        self.check_phase(from, Step::Link)?;
        self.check_phase(to, Step::Link)?;
        let lts = self.measured(Entity::SystemAdmin(from.into()), "long-key-share", |s| {
            mo_rbe::long_key_share(&s.ctx, s.org(from)?.sa.msk.as_ref().expect("set at init"))
        })?;
        self.send(
            Entity::SystemAdmin(from.into()),
            Entity::SystemAdmin(to.into()),
            vec![item(ItemKind::LongTermSecret { org: from.into() }, &lts.lts.to_bytes())],
        );
        let rekey = self.measured(Entity::SystemAdmin(to.into()), "make-rekey", |s| {
            mo_rbe::make_rekey(&s.ctx, s.org(to)?.sa.msk.as_ref().expect("set at init"), &lts)
        })?;
        self.send(
            Entity::SystemAdmin(to.into()),
            Entity::PrivateCloud(to.into()),
            vec![item(ItemKind::ReKey { host: to.into(), guest: from.into() }, &rekey.rk.to_bytes())],
        );
        if self.org_mut(to)?.pc.rekeys.insert(rekey)? {
            self.event(Event::Note(format!("re-encryption key {to}<-{from} re-issued")));
        }
        Ok(Outcome::Ok)
    }

    /// Sends a secret to an arbitrary entity. Only useful for testing the
    /// residency audit.
    fn leak(&mut self, org: &str, secret: &str, to: &str) -> Result<Outcome> {
        let to = Entity::parse(to)?;
        let o = org.to_string();
        let kind = match secret.split(':').collect::<Vec<_>>().as_slice() {
            ["msk"] => ItemKind::MasterSecret { org: o },
            ["t"] => ItemKind::RoleParams { org: o },
            ["sigma"] => ItemKind::Sigma { org: o },
            ["eta"] => ItemKind::Eta { org: o },
            ["g_delta"] => ItemKind::GDelta { org: o },
            ["rs", role] => ItemKind::RoleSecret(RoleId::new(org, *role)),
            ["us", user] => ItemKind::UserSecret { org: o, user: user.to_string() },
            ["u", user] => ItemKind::PrivateKey { org: o, user: user.to_string() },
            ["rk", user, role] => ItemKind::RoleKey { role: RoleId::new(org, *role), user: user.to_string() },
            _ => return Err(Error::Protocol(format!("unknown secret {secret:?}"))),
        };
        self.send(Entity::SystemAdmin(org.into()), to, vec![item(kind, secret.as_bytes())]);
        Ok(Outcome::Ok)
    }
}

/// Role hierarchy used by the canned scenarios.
pub const FIG1_HIERARCHY: &str = "\
role r1
role r2
role r3
role r4
role r5
role r6
role r7
role r8
edge r1 r2
edge r1 r3
edge r1 r4
edge r2 r5
edge r2 r6
edge r4 r6
edge r4 r7
edge r5 r8
edge r6 r8
edge r7 r8
";

const FIG1_SINGLE_ORG: &str = "\
init-org A
add-hierarchy A fig1.txt
gen-role-params A
register A alice
register A bob
register A carol
assign A alice r5
assign A bob r3
assign A carol r1
write msg.txt quarterly figures, draft 3
encrypt A r8 msg.txt ct-r8.rbec
decrypt A alice r5 ct-r8.rbec alice.out
decrypt A carol r1 ct-r8.rbec
decrypt A bob r3 ct-r8.rbec expect UnauthorizedRole
revoke A carol
decrypt A carol r1 ct-r8.rbec expect RevokedUser
decrypt A alice r5 ct-r8.rbec
";

const TWO_ORG_CONSORTIUM: &str = "\
init-org A
init-org B
add-hierarchy A fig1.txt
add-hierarchy B fig1.txt
gen-role-params A
gen-role-params B
register A alice
assign A alice r1
register B bob
assign B bob r2
register B dave
assign B dave r3
link B A
write msg.txt joint venture terms
mencrypt A r4 B r2 msg.txt joint.rbec
decrypt A alice r1 joint.rbec
mdecrypt B bob r2 joint.rbec bob.out
mdecrypt B dave r3 joint.rbec expect UnauthorizedRole
revoke B bob
mdecrypt B bob r2 joint.rbec expect RevokedUser
";

pub fn canned_scenario_names() -> &'static [&'static str] {
    &["fig1-single-org", "two-org-consortium"]
}

pub fn canned_scenario(name: &str) -> Option<&'static str> {
    match name {
        "fig1-single-org" => Some(FIG1_SINGLE_ORG),
        "two-org-consortium" => Some(TWO_ORG_CONSORTIUM),
        _ => None,
    }
}

/// Runs `script` on a fresh simulator seeded with `seed`. `fig1.txt` is
/// preloaded.
pub fn run_scenario(script: &str, seed: u64) -> std::result::Result<Transcript, (Transcript, ScriptError)> {
    let mut sim = match Simulator::new(seed) {
        Ok(s) => s,
        Err(error) => {
            return Err((
                Transcript::default(),
                ScriptError {
                    line: 0,
                    command: String::new(),
                    error,
                },
            ))
        }
    };
    sim.put_file("fig1.txt", FIG1_HIERARCHY);
    match sim.run_script(script) {
        Ok(()) => Ok(sim.into_transcript()),
        Err(e) => Err((sim.into_transcript(), e)),
    }
}
