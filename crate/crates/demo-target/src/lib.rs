//! In-process implementation of the minipet API with toggleable seeded
//! deviations.
//!
//! With no faults enabled every response carries a status and content type
//! that the bundled `minipet.json` document lists for the operation. Each
//! [`SeededFault`] introduces exactly one deviation.

mod handler;
mod multipart;

use std::collections::BTreeSet;
use std::fmt;
use std::net::SocketAddr;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

pub use handler::{Pet, Store, MAX_BODY_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeededFault {
    /// `GET /user/login` answers 200 with a token for invalid credentials.
    #[serde(rename = "login-200")]
    Login200,
    /// `POST /pets` with an oversized body answers 500 instead of 400.
    #[serde(rename = "undocumented-500")]
    Undocumented500,
    /// `GET /pets/{id}` answers 200 with a fabricated pet for unknown ids.
    #[serde(rename = "phantom-pet")]
    PhantomPet,
}

impl SeededFault {
    pub const ALL: [SeededFault; 3] = [
        SeededFault::Login200,
        SeededFault::Undocumented500,
        SeededFault::PhantomPet,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SeededFault::Login200 => "login-200",
            SeededFault::Undocumented500 => "undocumented-500",
            SeededFault::PhantomPet => "phantom-pet",
        }
    }

    /// Operation the fault affects.
    pub fn operation(self) -> &'static str {
        match self {
            SeededFault::Login200 => "GET /user/login",
            SeededFault::Undocumented500 => "POST /pets",
            SeededFault::PhantomPet => "GET /pets/{id}",
        }
    }

    pub fn trigger(self) -> &'static str {
        match self {
            SeededFault::Login200 => "invalid username or password",
            SeededFault::Undocumented500 => "request body larger than 4096 bytes",
            SeededFault::PhantomPet => "pet id not in the store",
        }
    }

    pub fn behavior(self) -> &'static str {
        match self {
            SeededFault::Login200 => "status 200 with a session token instead of 400",
            SeededFault::Undocumented500 => "status 500 instead of 400",
            SeededFault::PhantomPet => "status 200 with a fabricated pet instead of 404",
        }
    }
}

impl fmt::Display for SeededFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SeededFault {
    type Err = DemoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SeededFault::ALL
            .into_iter()
            .find(|f| f.id() == s.trim())
            .ok_or_else(|| DemoError::UnknownFault(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: String, message: String },
    #[error("unknown fault `{0}` (known: login-200, undocumented-500, phantom-pet)")]
    UnknownFault(String),
    #[error("invalid fault configuration: {0}")]
    Config(String),
}

/// Fault toggles, loadable from a JSON file such as `{"faults": ["login-200"]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    #[serde(default)]
    pub faults: BTreeSet<SeededFault>,
}

impl DemoConfig {
    pub fn with_faults(faults: impl IntoIterator<Item = SeededFault>) -> Self {
        DemoConfig {
            faults: faults.into_iter().collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, DemoError> {
        serde_json::from_str(text).map_err(|e| DemoError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DemoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DemoError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn has(&self, fault: SeededFault) -> bool {
        self.faults.contains(&fault)
    }
}

/// A running demo service. Dropping the handle stops it.
pub struct DemoHandle {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    store: Arc<Mutex<Store>>,
    worker: Option<JoinHandle<()>>,
}

impl DemoHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Restore the initial pets, user and id counter.
    pub fn reset(&self) {
        *self.store.lock().unwrap_or_else(|e| e.into_inner()) = Store::initial();
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Block until the service stops (it only stops when unblocked elsewhere).
    pub fn wait(mut self) {
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

impl Drop for DemoHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Start the service on `addr` (use port 0 for an ephemeral port).
pub fn serve(config: DemoConfig, addr: &str) -> Result<DemoHandle, DemoError> {
    let server = tiny_http::Server::http(addr).map_err(|e| DemoError::Bind {
        addr: addr.to_string(),
        message: e.to_string(),
    })?;
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| DemoError::Bind {
            addr: addr.to_string(),
            message: "not an IP socket".into(),
        })?;
    let server = Arc::new(server);
    let store = Arc::new(Mutex::new(Store::initial()));
    let worker = {
        let server = Arc::clone(&server);
        let store = Arc::clone(&store);
        std::thread::spawn(move || {
            for request in server.incoming_requests() {
                handler::respond(request, &config, &store);
            }
        })
    };
    Ok(DemoHandle {
        addr: bound,
        server,
        store,
        worker: Some(worker),
    })
}

/// Start on an ephemeral loopback port.
pub fn spawn(faults: impl IntoIterator<Item = SeededFault>) -> Result<DemoHandle, DemoError> {
    serve(DemoConfig::with_faults(faults), "127.0.0.1:0")
}

/// The bundled OpenAPI document the service implements.
pub const MINIPET_SPEC: &str = include_str!("../../../fixtures/minipet.json");
