//! Scripted agents used to record the replay transcripts under
//! `fixtures/transcripts`. Each answers by agent role and endpoint.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use restamp_core::dsl::{parse_suite, TestSuite};
use restamp_core::gateway::{
    ChatBackend, ChatMessage, ChatRequest, Gateway, GatewayError, Rates, RecordingBackend, Role,
    ScriptedBackend, ToolCall,
};
use restamp_core::prompts::PromptSet;
use restamp_core::runner::{RunOptions, SuiteRunner};
use restamp_core::spec_index::{load_spec, DocumentFormat, SpecIndex};
use restamp_core::workflow::{amplify, AmplificationResult, Architecture, Limits};
use restamp_demo::{SeededFault, MINIPET_SPEC};

pub const LIST_SUITE: &str = r#"{"version": 1, "name": "pets", "base_headers": {"Accept": "application/json"}, "cases": [
  {"name": "testListSoldPets", "description": "Filtering by status sold returns 200 with a JSON array",
   "steps": [{"method": "GET", "path": "/pets", "query_params": {"status": "sold"},
     "assertions": [{"kind": "status_equals", "expected": 200}, {"kind": "content_type_equals", "expected": "application/json"}]}]},
  {"name": "testListPendingPetsAsXml", "description": "Asking for XML returns the pending pets as XML",
   "steps": [{"method": "GET", "path": "/pets", "query_params": {"status": "pending"}, "headers": {"Accept": "application/xml"},
     "assertions": [{"kind": "status_equals", "expected": 200}, {"kind": "content_type_equals", "expected": "application/xml"}]}]},
  {"name": "testCreatePetWithPhoto", "description": "A multipart upload with a photo creates the pet",
   "steps": [{"method": "POST", "path": "/pets", "form_params": {"name": "tom", "status": "available"},
     "body": {"content_type": "multipart/form-data", "file": "cat.png", "field": "photo"},
     "assertions": [{"kind": "status_equals", "expected": 200}, {"kind": "body_field_equals", "selector": "name", "expected": "tom"}]}]},
  {"name": "testCreatePetFromXml", "description": "An XML body creates the pet",
   "steps": [{"method": "POST", "path": "/pets", "body": {"content_type": "application/xml", "text": "<Pet><name>rex</name><status>sold</status></Pet>"},
     "assertions": [{"kind": "status_equals", "expected": 200}, {"kind": "body_field_equals", "selector": "status", "expected": "sold"}]}]},
  {"name": "testCreatePetWithoutName", "description": "A pet without a name is rejected with 400",
   "steps": [{"method": "POST", "path": "/pets", "body": {"content_type": "application/json", "text": "{\"status\": \"available\"}"},
     "assertions": [{"kind": "status_equals", "expected": 400}]}]}
]}"#;

pub const PET_SUITE: &str = r#"{"version": 1, "name": "pet", "base_headers": {"Accept": "application/json"}, "cases": [
  {"name": "testGetExistingPet", "description": "Pet 1 is returned by id",
   "steps": [{"method": "GET", "path": "/pets/{id}", "path_params": {"id": "1"},
     "assertions": [{"kind": "status_equals", "expected": 200}, {"kind": "body_field_equals", "selector": "name", "expected": "doggie"}]}]},
  {"name": "testGetUnknownPet", "description": "An id that was never created answers 404",
   "steps": [{"method": "GET", "path": "/pets/{id}", "path_params": {"id": "999"},
     "assertions": [{"kind": "status_equals", "expected": 404}]}]},
  {"name": "testGetPetWithInvalidId", "description": "Ids below the minimum of 1 answer 400",
   "steps": [{"method": "GET", "path": "/pets/{id}", "path_params": {"id": "0"},
     "assertions": [{"kind": "status_class_equals", "expected": "4xx"}]}]},
  {"name": "testDeleteCreatedPet", "description": "A freshly created pet can be deleted",
   "steps": [{"method": "POST", "path": "/pets", "body": {"content_type": "application/json", "text": "{\"name\": \"bolt\"}"}, "captures": {"petId": "id"}},
     {"method": "DELETE", "path": "/pets/{id}", "path_params": {"id": "{{petId}}"},
     "assertions": [{"kind": "status_equals", "expected": 200}]}]},
  {"name": "testDeleteUnknownPet", "description": "Deleting an unknown pet answers 404",
   "steps": [{"method": "DELETE", "path": "/pets/{id}", "path_params": {"id": "999"},
     "assertions": [{"kind": "status_equals", "expected": 404}]}]}
]}"#;

/// `PET_SUITE` with a missing `]` after the first case's steps.
pub const PET_SUITE_BROKEN: &str = r#"{"version": 1, "name": "pet", "base_headers": {"Accept": "application/json"}, "cases": [
  {"name": "testGetExistingPet", "description": "Pet 1 is returned by id",
   "steps": [{"method": "GET", "path": "/pets/{id}", "path_params": {"id": "1"},
     "assertions": [{"kind": "status_equals", "expected": 200}, {"kind": "body_field_equals", "selector": "name", "expected": "doggie"}]}},
  {"name": "testGetUnknownPet", "description": "An id that was never created answers 404",
   "steps": [{"method": "GET", "path": "/pets/{id}", "path_params": {"id": "999"},
     "assertions": [{"kind": "status_equals", "expected": 404}]}]}
]}"#;

pub const LOGIN_SUITE: &str = r#"{"version": 1, "name": "login", "base_headers": {"Accept": "application/json"}, "cases": [
  {"name": "testLoginValidCredentials", "description": "Known credentials yield a session token",
   "steps": [{"method": "GET", "path": "/user/login", "query_params": {"username": "user1", "password": "secret"},
     "assertions": [{"kind": "status_equals", "expected": 200}, {"kind": "content_type_equals", "expected": "application/json"}]}]},
  {"name": "testLoginBadPassword", "description": "A wrong password must be rejected with 400",
   "steps": [{"method": "GET", "path": "/user/login", "query_params": {"username": "user1", "password": "wrong"},
     "assertions": [{"kind": "status_equals", "expected": 400}]}]},
  {"name": "testLoginMissingPassword", "description": "Omitting the password answers 400",
   "steps": [{"method": "GET", "path": "/user/login", "query_params": {"username": "user1"},
     "assertions": [{"kind": "status_equals", "expected": 400}]}]}
]}"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Pets,
    Pet,
    Login,
}

impl Endpoint {
    fn path(self) -> &'static str {
        match self {
            Endpoint::Pets => "/pets",
            Endpoint::Pet => "/pets/{id}",
            Endpoint::Login => "/user/login",
        }
    }

    fn suite(self) -> &'static str {
        match self {
            Endpoint::Pets => LIST_SUITE,
            Endpoint::Pet => PET_SUITE,
            Endpoint::Login => LOGIN_SUITE,
        }
    }
}

fn endpoint_of(request: &ChatRequest) -> Result<Endpoint, GatewayError> {
    let user = request
        .messages
        .iter()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("");
    [Endpoint::Login, Endpoint::Pet, Endpoint::Pets]
        .into_iter()
        .find(|e| user.contains(&format!("\n{}\n", e.path())))
        .ok_or_else(|| GatewayError::Malformed("no endpoint in the prompt".into()))
}

fn tool_results(request: &ChatRequest) -> usize {
    request.messages.iter().filter(|m| m.role == Role::Tool).count()
}

fn call(id: &str, name: &str, arguments: serde_json::Value) -> ChatMessage {
    ChatMessage::tool_calls(vec![ToolCall {
        id: id.into(),
        name: name.into(),
        arguments: arguments.to_string(),
    }])
}

fn fenced(preface: &str, suite: &str) -> ChatMessage {
    ChatMessage::assistant(format!("{preface}\n```json\n{suite}\n```"))
}

/// One retrieval, one trial execution, then the final suite.
pub fn single_agent(request: &ChatRequest) -> Result<ChatMessage, GatewayError> {
    let endpoint = endpoint_of(request)?;
    Ok(match tool_results(request) {
        0 => call("call_1", "openapi_retriever", serde_json::json!({"path": endpoint.path()})),
        1 => call("call_2", "local_executor", serde_json::json!({"suite": endpoint.suite()})),
        _ => fenced(
            "The suite parses and runs. Failing cases that expect documented statuses are kept as bug reports.",
            endpoint.suite(),
        ),
    })
}

fn summary(endpoint: Endpoint) -> &'static str {
    match endpoint {
        Endpoint::Pets => "GET /pets filters by status (available, pending, sold) and returns 200 as JSON or XML. POST /pets accepts JSON, XML or multipart bodies with a required name and answers 200 with the pet or 400.",
        Endpoint::Pet => "GET /pets/{id} returns the pet (200, JSON or XML), 400 for ids below 1 and 404 for unknown ids. DELETE answers 200, 400 or 404.",
        Endpoint::Login => "GET /user/login takes username and password query parameters and answers 200 with a token (JSON or XML) or 400 for invalid credentials.",
    }
}

fn suggestion(system: &str, endpoint: Endpoint) -> Option<&'static str> {
    let (header, parameter, value) = match endpoint {
        Endpoint::Pets => (
            "Request application/xml through Accept; send XML and multipart bodies.",
            "Create a pet without the required name.",
            "Filter by sold and pending.",
        ),
        Endpoint::Pet => (
            "Keep Accept: application/json.",
            "Create a pet, capture its id and delete it.",
            "Use id 1, an unknown id 999 and the out-of-range id 0.",
        ),
        Endpoint::Login => (
            "Keep Accept: application/json.",
            "Omit the password.",
            "Log in with user1/secret, then with a wrong password.",
        ),
    };
    if system.contains("header specialist") {
        Some(header)
    } else if system.contains("parameter specialist") {
        Some(parameter)
    } else if system.contains("value specialist") {
        Some(value)
    } else {
        None
    }
}

fn plan(endpoint: Endpoint) -> &'static str {
    match endpoint {
        Endpoint::Pets => "- [value] list sold pets\n- [header] list pending pets as XML\n- [header] create a pet through a multipart upload\n- [header] create a pet from XML\n- [parameter] create a pet without a name\n",
        Endpoint::Pet => "- [value] fetch pet 1\n- [value] fetch unknown pet 999\n- [value] fetch id 0\n- [parameter] create then delete a pet\n- [value] delete unknown pet 999\n",
        Endpoint::Login => "- [value] log in with valid credentials\n- [value] log in with a wrong password\n- [parameter] log in without a password\n",
    }
}

/// The multi-agent pipeline. With `broken_writer` the writer's draft for
/// `/pets/{id}` has a syntax error that the repair agent fixes.
pub fn multi_agent(broken_writer: bool) -> impl Fn(&ChatRequest) -> Result<ChatMessage, GatewayError> + Send + Sync {
    move |request| {
        let system = request.messages[0].content.as_str();
        if system.contains("repair engineer") {
            // the repair prompt names no endpoint; the draft identifies it
            let draft = request.messages[1].content.as_str();
            let endpoint = [Endpoint::Pets, Endpoint::Pet, Endpoint::Login]
                .into_iter()
                .find(|e| draft.contains(&format!("\"path\": \"{}\"", e.path())))
                .ok_or_else(|| GatewayError::Malformed("unknown draft".into()))?;
            return Ok(fenced("Closed the steps array of the first case.", endpoint.suite()));
        }
        let endpoint = endpoint_of(request)?;
        if system.contains("API analyst") {
            return Ok(match (tool_results(request), endpoint) {
                (0, _) => call("call_1", "openapi_retriever", serde_json::json!({"path": endpoint.path()})),
                (1, Endpoint::Pets) => call("call_2", "openapi_retriever", serde_json::json!({"definition": "Pet"})),
                _ => ChatMessage::assistant(summary(endpoint)),
            });
        }
        if let Some(text) = suggestion(system, endpoint) {
            return Ok(ChatMessage::assistant(text));
        }
        if system.contains("test planner") {
            return Ok(ChatMessage::assistant(format!("Plan:\n{}", plan(endpoint))));
        }
        if system.contains("test writer") {
            let draft = if broken_writer && endpoint == Endpoint::Pet {
                PET_SUITE_BROKEN
            } else {
                endpoint.suite()
            };
            return Ok(fenced("Suite for the plan above.", draft));
        }
        Err(GatewayError::Malformed(format!("unexpected agent: {system}")))
    }
}

/// One recorded scenario.
#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub architecture: Architecture,
    pub broken_writer: bool,
}

pub const SCENARIOS: [Scenario; 3] = [
    Scenario {
        name: "S1",
        architecture: Architecture::SingleAgent,
        broken_writer: false,
    },
    Scenario {
        name: "M1",
        architecture: Architecture::MultiAgent,
        broken_writer: false,
    },
    Scenario {
        name: "M2",
        architecture: Architecture::MultiAgent,
        broken_writer: true,
    },
];

/// Faults the recordings were made against.
pub const FAULTS: [SeededFault; 1] = [SeededFault::Login200];

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn transcript_path(name: &str) -> PathBuf {
    repo_root().join("fixtures/transcripts").join(format!("{name}.jsonl"))
}

pub fn seed_path() -> PathBuf {
    repo_root().join("fixtures/seed/suite.json")
}

pub fn spec_path() -> PathBuf {
    repo_root().join("fixtures/minipet.json")
}

fn scripted(scenario: Scenario) -> ScriptedBackend {
    match scenario.architecture {
        Architecture::SingleAgent => ScriptedBackend::from_fn(single_agent),
        Architecture::MultiAgent => ScriptedBackend::from_fn(multi_agent(scenario.broken_writer)),
    }
}

/// Run a scenario in-process against a fresh faulty demo. With `record`,
/// every exchange is written to that transcript.
pub fn run_scenario(scenario: Scenario, record: Option<&Path>) -> AmplificationResult {
    let index: SpecIndex = load_spec(MINIPET_SPEC, DocumentFormat::Json).unwrap();
    let seed: TestSuite = parse_suite(&std::fs::read_to_string(seed_path()).unwrap()).unwrap();
    let demo = restamp_demo::spawn(FAULTS).unwrap();
    let options = RunOptions {
        asset_dir: Some(repo_root().join("fixtures/seed/assets")),
        zero_durations: true,
        ..RunOptions::default()
    };
    let runner = SuiteRunner::new(demo.base_url(), options).with_index(&index);
    let backend: Box<dyn ChatBackend> = match record {
        Some(path) => {
            let _ = std::fs::remove_file(path);
            Box::new(RecordingBackend::new(Box::new(scripted(scenario)), path))
        }
        None => Box::new(scripted(scenario)),
    };
    let gateway = Gateway::new(backend, Rates::default());
    let result = amplify(
        &index,
        &seed,
        &runner,
        &gateway,
        &PromptSet::builtin(),
        scenario.architecture,
        &Limits::default(),
    )
    .unwrap();
    for run in &result.endpoints {
        assert!(run.error.is_none() && !run.incomplete, "{}: {:?}", scenario.name, run);
    }
    result
}

/// Re-record every transcript when `RESTAMP_BLESS=1`.
pub fn bless_if_requested() {
    if std::env::var("RESTAMP_BLESS").as_deref() == Ok("1") {
        for scenario in SCENARIOS {
            run_scenario(scenario, Some(&transcript_path(scenario.name)));
        }
    }
}
