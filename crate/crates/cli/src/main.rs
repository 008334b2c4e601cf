//! `wotreg` command-line interface.
//!
//! Every command prints one JSON document on stdout. Exit status is 0 on
//! success or acceptance, 1 on rejection, 2 on usage or infrastructure errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wotreg::castore::{ContentAddress, ContentStore};
use wotreg::credential::{decode_revocations, publish_revocation, check_revocation, verify_credential_signature, Credential};
use wotreg::identity::{register_self, resolve_did, Did, KeyPair};
use wotreg::ledger::{attest_digest, AccessMode, Ledger, LedgerConfig, NodeBehavior, DEFAULT_NODES};
use wotreg::policy::{parse_policy, verify_full, verify_issuer_legitimacy, TrustPolicy};
use wotreg::scenario::{actor_keypair, run_scenario, Scenario};
use wotreg::transform::{
    apply_template, find_transform_paths, publish_transform, transform_chain, Template, TransformEdge, TransformError,
    TransformGraph,
};
use wotreg::wot::{make_trust_statement, publish_statement, Context, TrustStatement, WotGraph};

const LEDGER_FILE: &str = "ledger.wotl";

#[derive(Parser)]
#[command(name = "wotreg", version, about = "Web-of-trust registry for education credentials")]
struct Cli {
    /// Directory holding the persisted ledger.
    #[arg(long, global = true, env = "WOTREG_LEDGER", default_value = ".wotreg/ledger")]
    ledger: PathBuf,
    /// Directory holding the content-addressed template store.
    #[arg(long, global = true, env = "WOTREG_STORE", default_value = ".wotreg/store")]
    store: PathBuf,
    /// Number of simulated replica nodes.
    #[arg(long, global = true, default_value_t = DEFAULT_NODES)]
    nodes: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair and its DID.
    Keygen {
        /// 32-byte seed as 64 hex characters.
        #[arg(long, conflicts_with = "seed_phrase")]
        seed: Option<String>,
        /// Derive the seed as SHA-256 of this text (as scenario actors do).
        #[arg(long)]
        seed_phrase: Option<String>,
        /// Write the seed (one hex line) here; stdout then omits it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(subcommand)]
    Did(DidCommand),
    #[command(subcommand)]
    Ledger(LedgerCommand),
    /// Trust statements (certificates).
    #[command(subcommand)]
    Cert(CertCommand),
    #[command(subcommand)]
    Cred(CredCommand),
    #[command(subcommand)]
    Transform(TransformCommand),
    #[command(subcommand)]
    Policy(PolicyCommand),
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    #[command(subcommand)]
    Store(StoreCommand),
}

#[derive(Subcommand)]
enum DidCommand {
    /// Bind the key's DID to its public key on the ledger.
    Register {
        #[arg(long)]
        key: PathBuf,
    },
    Resolve { did: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Open,
    SelfOriginOnly,
    MembersOnly,
}

#[derive(Subcommand)]
enum LedgerCommand {
    /// Deploy a fresh registry.
    Init {
        #[arg(long, value_enum, default_value = "open")]
        mode: Mode,
        /// Initial member DIDs for members-only mode.
        #[arg(long = "member")]
        members: Vec<String>,
        #[arg(long, default_value_t = 0)]
        genesis_time: u64,
        /// Replace an existing ledger.
        #[arg(long)]
        force: bool,
    },
    /// Print blocks and decoded registry state.
    Dump,
    /// Ask every node for its state digest and compare.
    Attest {
        /// Simulate a node that hides the latest trust statement.
        #[arg(long)]
        censor: Vec<usize>,
        /// Simulate an unreachable node.
        #[arg(long)]
        offline: Vec<usize>,
    },
}

#[derive(Args)]
struct EdgeTarget {
    /// Signing key of the certifier.
    #[arg(long)]
    key: PathBuf,
    /// DID being vouched for.
    #[arg(long)]
    issuer: String,
    #[arg(long, default_value = "credential")]
    context: String,
    /// Credential schema or source schema URI, or `*`.
    #[arg(long, default_value = "*")]
    uri: String,
    /// Defaults to the current time.
    #[arg(long)]
    timestamp: Option<u64>,
}

#[derive(Subcommand)]
enum CertCommand {
    Issue {
        #[command(flatten)]
        target: EdgeTarget,
        #[arg(long, allow_hyphen_values = true)]
        legitimacy: i32,
        #[arg(long, allow_hyphen_values = true)]
        confidence: i32,
    },
    /// Supersede an earlier statement with a newer, reduced one.
    Revoke {
        #[command(flatten)]
        target: EdgeTarget,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        legitimacy: i32,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        confidence: i32,
    },
}

#[derive(Subcommand)]
enum CredCommand {
    Issue {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        schema: String,
        /// JSON file with the claims document.
        #[arg(long)]
        claims: PathBuf,
        /// Defaults to the current time.
        #[arg(long)]
        issued_at: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check signature and revocation; with a policy, also issuer legitimacy.
    Verify {
        #[arg(long)]
        credential: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Evaluation time; defaults to WOTREG_TIME or the clock.
        #[arg(long)]
        at: Option<u64>,
    },
    Revoke {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        credential: PathBuf,
        #[arg(long)]
        at: Option<u64>,
    },
}

#[derive(Subcommand)]
enum TransformCommand {
    /// Store a template and publish a signed edge pointing at it.
    Publish {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        timestamp: Option<u64>,
    },
    /// Apply a template file to a claims file, offline.
    Apply {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        claims: PathBuf,
    },
    /// Transform a credential into a schema the policy supports.
    Chain {
        #[arg(long)]
        credential: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Target schema; defaults to each supported schema in turn.
        #[arg(long)]
        target: Option<String>,
    },
}

#[derive(Subcommand)]
enum PolicyCommand {
    /// Run the full verification pipeline on a credential.
    Check {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        credential: PathBuf,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Run a scenario file on a fresh in-memory ledger and store.
    Run {
        file: PathBuf,
        /// Also persist the resulting ledger and store to --ledger/--store.
        #[arg(long)]
        persist: bool,
    },
}

#[derive(Subcommand)]
enum StoreCommand {
    Put { file: PathBuf },
    /// Write a blob's bytes to stdout after checking its address.
    Get { address: String },
    /// Remove blobs not referenced by any transformation edge.
    Gc,
}

/// Result of a command: the JSON document and whether it counts as accepted.
struct Output {
    body: Value,
    ok: bool,
}

impl Output {
    fn ok(body: Value) -> Self {
        Output { body, ok: true }
    }
}

fn now() -> Result<u64> {
    match std::env::var("WOTREG_TIME") {
        Ok(t) => t.parse().with_context(|| format!("WOTREG_TIME={t:?} is not an integer")),
        Err(_) => Ok(SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json(path: &Path) -> Result<Value> {
    serde_json::from_slice(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn key_json(kp: &KeyPair) -> Value {
    json!({
        "did": kp.did().to_string(),
        "publicKey": hex::encode(kp.public_key()),
        "seed": hex::encode(kp.secret_seed()),
    })
}

/// Key files hold the 32-byte seed as one line of hex.
fn load_key(path: &Path) -> Result<KeyPair> {
    let text = String::from_utf8(read(path)?).with_context(|| format!("{}: not UTF-8", path.display()))?;
    parse_seed(text.trim())
        .map(|seed| KeyPair::from_seed(&seed))
        .with_context(|| format!("{}: bad key file", path.display()))
}

fn parse_seed(hex_seed: &str) -> Result<[u8; 32]> {
    let bytes = hex::decode(hex_seed).context("seed is not hex")?;
    bytes.try_into().map_err(|_| anyhow!("seed must be 32 bytes"))
}

fn parse_did(s: &str) -> Result<Did> {
    s.parse().map_err(|e| anyhow!("{s}: {e}"))
}

fn load_credential(path: &Path) -> Result<Credential> {
    Credential::decode(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn load_policy(path: &Path) -> Result<TrustPolicy> {
    parse_policy(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

struct Env {
    ledger_dir: PathBuf,
    store_dir: PathBuf,
    nodes: usize,
}

impl Env {
    fn ledger_file(&self) -> PathBuf {
        self.ledger_dir.join(LEDGER_FILE)
    }

    fn ledger(&self) -> Result<Ledger> {
        let path = self.ledger_file();
        if !path.exists() {
            bail!("no ledger at {} (run `wotreg ledger init`)", path.display());
        }
        Ledger::load(&path, self.nodes).with_context(|| format!("loading {}", path.display()))
    }

    fn save(&self, ledger: &Ledger) -> Result<()> {
        fs::create_dir_all(&self.ledger_dir)?;
        // Write then rename so a crash never leaves a truncated ledger.
        let tmp = self.ledger_dir.join(format!("{LEDGER_FILE}.tmp"));
        ledger.save(&tmp)?;
        fs::rename(&tmp, self.ledger_file())?;
        Ok(())
    }

    fn store(&self) -> Result<ContentStore> {
        ContentStore::open_dir(&self.store_dir).with_context(|| format!("opening store {}", self.store_dir.display()))
    }
}

fn receipt_json(r: &wotreg::ledger::Receipt) -> Value {
    serde_json::to_value(r).expect("receipt serializes")
}

fn cert(env: &Env, target: &EdgeTarget, legitimacy: i32, confidence: i32) -> Result<Output> {
    let ledger = env.ledger()?;
    let kp = load_key(&target.key)?;
    let context: Context = target.context.parse().map_err(|e| anyhow!("--context: {e}"))?;
    let timestamp = match target.timestamp {
        Some(t) => t,
        None => now()?,
    };
    let statement = make_trust_statement(
        &kp,
        parse_did(&target.issuer)?,
        legitimacy,
        confidence,
        context,
        &target.uri,
        timestamp,
    )?;
    let receipt = publish_statement(&ledger, &kp, &statement)?;
    env.save(&ledger)?;
    Ok(Output::ok(json!({"statement": statement, "receipt": receipt_json(&receipt)})))
}

fn dump(ledger: &Ledger) -> Value {
    let state = ledger.state();
    let wot: Vec<Value> = state
        .wot_edges()
        .iter()
        .map(|b| TrustStatement::decode(b).map_or_else(|e| json!({"undecodable": e.to_string()}), |s| json!(s)))
        .collect();
    let transforms: Vec<Value> = state
        .transform_edges()
        .iter()
        .map(|b| TransformEdge::decode(b).map_or_else(|e| json!({"undecodable": e.to_string()}), |s| json!(s)))
        .collect();
    let bindings: Vec<Value> = state
        .did_bindings()
        .map(|(did, key)| json!({"did": did.to_string(), "publicKey": hex::encode(key)}))
        .collect();
    let blocks: Vec<Value> = ledger
        .blocks()
        .iter()
        .map(|b| json!({"height": b.height, "time": b.time, "txs": b.txs.len(), "digest": b.digest}))
        .collect();
    json!({
        "address": ledger.address().to_string(),
        "height": ledger.height(),
        "stateDigest": ledger.state_digest(),
        "blocks": blocks,
        "didBindings": bindings,
        "wot": wot,
        "transforms": transforms,
        "revocations": decode_revocations(state.revocations()),
    })
}

fn run(cli: Cli) -> Result<Output> {
    let env = Env {
        ledger_dir: cli.ledger,
        store_dir: cli.store,
        nodes: cli.nodes,
    };
    match cli.command {
        Command::Keygen { seed, seed_phrase, out } => {
            let kp = match (seed, seed_phrase) {
                (Some(s), _) => KeyPair::from_seed(&parse_seed(&s)?),
                (None, Some(p)) => actor_keypair(&p),
                (None, None) => wotreg::keygen(None)?,
            };
            let body = key_json(&kp);
            match out {
                Some(path) => {
                    write_out(&path, format!("{}\n", hex::encode(kp.secret_seed())).as_bytes())?;
                    Ok(Output::ok(json!({"did": body["did"], "publicKey": body["publicKey"], "keyFile": path})))
                }
                None => Ok(Output::ok(body)),
            }
        }

        Command::Did(DidCommand::Register { key }) => {
            let ledger = env.ledger()?;
            let kp = load_key(&key)?;
            let receipt = register_self(&ledger, &kp)?;
            env.save(&ledger)?;
            Ok(Output {
                ok: receipt.accepted,
                body: json!({"did": kp.did().to_string(), "receipt": receipt_json(&receipt)}),
            })
        }
        Command::Did(DidCommand::Resolve { did }) => {
            let ledger = env.ledger()?;
            let did = parse_did(&did)?;
            match resolve_did(&ledger, &did) {
                Ok(key) => Ok(Output::ok(json!({"did": did.to_string(), "publicKey": hex::encode(key)}))),
                Err(e) => Ok(Output {
                    ok: false,
                    body: json!({"did": did.to_string(), "error": e.to_string()}),
                }),
            }
        }

        Command::Ledger(LedgerCommand::Init {
            mode,
            members,
            genesis_time,
            force,
        }) => {
            if env.ledger_file().exists() && !force {
                bail!("ledger already exists at {} (use --force)", env.ledger_file().display());
            }
            let access_mode = match mode {
                Mode::Open => AccessMode::Open,
                Mode::SelfOriginOnly => AccessMode::SelfOriginOnly,
                Mode::MembersOnly => {
                    AccessMode::MembersOnly(members.iter().map(|m| parse_did(m)).collect::<Result<_>>()?)
                }
            };
            let config = LedgerConfig {
                access_mode,
                nodes: env.nodes,
                genesis_time,
                ..LedgerConfig::new(AccessMode::Open)
            };
            let ledger = Ledger::deploy(config);
            env.save(&ledger)?;
            Ok(Output::ok(json!({
                "address": ledger.address().to_string(),
                "height": ledger.height(),
                "stateDigest": ledger.state_digest(),
                "file": env.ledger_file(),
            })))
        }
        Command::Ledger(LedgerCommand::Dump) => Ok(Output::ok(dump(&env.ledger()?))),
        Command::Ledger(LedgerCommand::Attest { censor, offline }) => {
            let ledger = env.ledger()?;
            for &i in &censor {
                ledger.set_node_behavior(i, NodeBehavior::DropLatestWotEdge)?;
            }
            for &i in &offline {
                ledger.set_node_behavior(i, NodeBehavior::Offline)?;
            }
            let attestation = attest_digest(&ledger.nodes());
            Ok(Output {
                ok: attestation.consistent,
                body: json!(attestation),
            })
        }

        Command::Cert(CertCommand::Issue {
            target,
            legitimacy,
            confidence,
        })
        | Command::Cert(CertCommand::Revoke {
            target,
            legitimacy,
            confidence,
        }) => cert(&env, &target, legitimacy, confidence),

        Command::Cred(CredCommand::Issue {
            key,
            subject,
            schema,
            claims,
            issued_at,
            out,
        }) => {
            let kp = load_key(&key)?;
            let issued_at = match issued_at {
                Some(t) => t,
                None => now()?,
            };
            let cred = wotreg::issue_credential(&kp, parse_did(&subject)?, schema, read_json(&claims)?, issued_at)?;
            let bytes = cred.encode()?;
            match out {
                Some(path) => {
                    write_out(&path, &bytes)?;
                    Ok(Output::ok(json!({"digest": cred.digest()?, "file": path})))
                }
                None => Ok(Output::ok(json!(cred))),
            }
        }
        Command::Cred(CredCommand::Verify { credential, policy, at }) => {
            let ledger = env.ledger()?;
            let cred = load_credential(&credential)?;
            let at = match at {
                Some(t) => t,
                None => now()?,
            };
            match policy {
                Some(p) => {
                    let check = verify_issuer_legitimacy(&cred, &load_policy(&p)?, &ledger, at);
                    Ok(Output {
                        ok: check.accepted,
                        body: json!(check),
                    })
                }
                None => {
                    let signature = verify_credential_signature(&cred, &ledger);
                    let revocation = check_revocation(&cred, &decode_revocations(&ledger.get_revocations()), at);
                    Ok(Output {
                        ok: signature.is_ok() && !revocation.revoked,
                        body: json!({
                            "signatureValid": signature.is_ok(),
                            "signatureError": signature.err().map(|e| e.to_string()),
                            "revocation": revocation,
                            "atTime": at,
                        }),
                    })
                }
            }
        }
        Command::Cred(CredCommand::Revoke { key, credential, at }) => {
            let ledger = env.ledger()?;
            let kp = load_key(&key)?;
            let cred = load_credential(&credential)?;
            let at = match at {
                Some(t) => t,
                None => now()?,
            };
            let (entry, receipt) = publish_revocation(&ledger, &kp, &cred, at)?;
            env.save(&ledger)?;
            Ok(Output::ok(json!({"revocation": entry, "receipt": receipt_json(&receipt)})))
        }

        Command::Transform(TransformCommand::Publish {
            key,
            source,
            target,
            template,
            timestamp,
        }) => {
            let ledger = env.ledger()?;
            let store = env.store()?;
            let kp = load_key(&key)?;
            let timestamp = match timestamp {
                Some(t) => t,
                None => now()?,
            };
            let edge = publish_transform(&kp, &source, &target, &read(&template)?, timestamp, &store, &ledger)?;
            env.save(&ledger)?;
            Ok(Output::ok(json!(edge)))
        }
        Command::Transform(TransformCommand::Apply { template, claims }) => {
            let template = Template::parse(&read(&template)?)?;
            Ok(Output::ok(json!(apply_template(&template, &read_json(&claims)?))))
        }
        Command::Transform(TransformCommand::Chain {
            credential,
            policy,
            target,
        }) => {
            let ledger = env.ledger()?;
            let store = env.store()?;
            let cred = load_credential(&credential)?;
            let policy = load_policy(&policy)?;
            let at = policy.time_mode.resolve(&cred, now()?);
            let state = ledger.state();
            let (wot, _) = WotGraph::from_registry(state.wot_edges(), &state);
            let (graph, _) = TransformGraph::from_registry(state.transform_edges(), &state);
            let targets = match target {
                Some(t) => vec![t],
                None => policy.supported_schemas.clone(),
            };
            let mut failures: Vec<TransformError> = Vec::new();
            for t in &targets {
                for path in find_transform_paths(&graph, &cred.schema, t, policy.max_transform_hops, at) {
                    match transform_chain(&cred, &path, &wot, &policy, &store, &state, at) {
                        Ok(outcome) => {
                            return Ok(Output::ok(json!({
                                "schemaChain": path.schemas(&cred.schema),
                                "edges": path.indices,
                                "outcome": outcome,
                            })))
                        }
                        Err(e) => failures.push(e),
                    }
                }
            }
            Ok(Output {
                ok: false,
                body: json!({"error": if failures.is_empty() { "no transformation path" } else { "no authenticated path" },
                             "failures": failures}),
            })
        }

        Command::Policy(PolicyCommand::Check { policy, credential }) => {
            let ledger = env.ledger()?;
            let store = env.store()?;
            let report = verify_full(&load_credential(&credential)?, &load_policy(&policy)?, &ledger, &store, now()?)?;
            Ok(Output {
                ok: report.accepted,
                body: json!(report),
            })
        }

        Command::Scenario(ScenarioCommand::Run { file, persist }) => {
            let scenario = Scenario::parse(&read(&file)?)?;
            let run = run_scenario(&scenario)?;
            if persist {
                env.save(&run.ledger)?;
                env.store()?.sync_from(&run.store)?;
            }
            let summary = run.summary();
            Ok(Output {
                ok: summary.all_expectations_met,
                body: json!(summary),
            })
        }

        Command::Store(StoreCommand::Put { file }) => {
            let address = env.store()?.put(&read(&file)?)?;
            Ok(Output::ok(json!({"address": address})))
        }
        Command::Store(StoreCommand::Get { address }) => {
            let address: ContentAddress = address.parse().map_err(|e| anyhow!("{address}: {e}"))?;
            let bytes = env.store()?.get(&address)?;
            Ok(Output::ok(match String::from_utf8(bytes) {
                Ok(text) => json!({"address": address, "text": text}),
                Err(e) => json!({"address": address, "hex": hex::encode(e.into_bytes())}),
            }))
        }
        Command::Store(StoreCommand::Gc) => {
            let ledger = env.ledger()?;
            let pinned = ledger
                .get_transform()
                .iter()
                .filter_map(|b| TransformEdge::decode(b).ok())
                .map(|e| e.template_address)
                .collect();
            let removed = env.store()?.gc(&pinned)?;
            Ok(Output::ok(json!({"removed": removed})))
        }
    }
}

/// Prints to stdout, tolerating a closed pipe (`wotreg ... | head`).
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            emit(&serde_json::to_string_pretty(&out.body).expect("output serializes"));
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("wotreg: {e:#}");
            emit(&json!({"error": {"message": format!("{e:#}")}}).to_string());
            ExitCode::from(2)
        }
    }
}
