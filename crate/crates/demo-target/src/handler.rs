use std::collections::BTreeMap;
use std::io::Read;
use std::sync::Mutex;

use serde::Serialize;
use tiny_http::{Header, Method, Request, Response};

use crate::{multipart, DemoConfig, SeededFault};

/// Largest accepted `POST /pets` payload.
pub const MAX_BODY_BYTES: usize = 4096;

const STATUSES: [&str; 3] = ["available", "pending", "sold"];
const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pet {
    pub id: i64,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    pub pets: BTreeMap<i64, Pet>,
    pub users: BTreeMap<String, String>,
    pub next_id: i64,
}

impl Store {
    pub fn initial() -> Store {
        let pet = |id: i64, name: &str, status: &str| {
            (
                id,
                Pet {
                    id,
                    name: name.into(),
                    status: Some(status.into()),
                },
            )
        };
        Store {
            pets: BTreeMap::from([pet(1, "doggie", "available"), pet(2, "kitty", "pending")]),
            users: BTreeMap::from([("user1".to_string(), "secret".to_string())]),
            next_id: 3,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Json,
    Xml,
}

struct Reply {
    status: u16,
    body: Option<(Format, Vec<u8>)>,
}

impl Reply {
    fn empty(status: u16) -> Reply {
        Reply { status, body: None }
    }
}

pub(crate) fn respond(mut request: Request, config: &DemoConfig, store: &Mutex<Store>) {
    let reply = handle(&mut request, config, store);
    let response = match reply.body {
        None => Response::empty(reply.status).boxed(),
        Some((format, bytes)) => {
            let ct = match format {
                Format::Json => "application/json",
                Format::Xml => "application/xml",
            };
            Response::from_data(bytes)
                .with_status_code(reply.status)
                .with_header(Header::from_bytes("Content-Type", ct).expect("static header"))
                .boxed()
        }
    };
    let _ = request.respond(response);
}

fn handle(request: &mut Request, config: &DemoConfig, store: &Mutex<Store>) -> Reply {
    let raw_url = request.url().to_string();
    let (path, query) = raw_url.split_once('?').unwrap_or((&raw_url, ""));
    let query: BTreeMap<String, String> = url::form_urlencoded::parse(query.as_bytes())
        .into_owned()
        .collect();
    let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    let format = negotiate(header(request, "Accept").as_deref());
    let method = request.method().clone();
    let mut store = store.lock().unwrap_or_else(|e| e.into_inner());

    match (segments.as_slice(), method) {
        (["pets"], Method::Get) => list_pets(&store, query.get("status"), format),
        (["pets"], Method::Post) => {
            let content_type = header(request, "Content-Type").unwrap_or_default();
            let mut body = Vec::new();
            let read = request
                .as_reader()
                .take(16 * MAX_BODY_BYTES as u64)
                .read_to_end(&mut body);
            if read.is_err() {
                return Reply::empty(400);
            }
            if body.len() > MAX_BODY_BYTES {
                return if config.has(SeededFault::Undocumented500) {
                    Reply::empty(500)
                } else {
                    Reply::empty(400)
                };
            }
            match parse_new_pet(&content_type, &body) {
                Some((name, status)) => {
                    let id = store.next_id;
                    store.next_id += 1;
                    let pet = Pet { id, name, status };
                    store.pets.insert(id, pet.clone());
                    render_pet(&pet, format)
                }
                None => Reply::empty(400),
            }
        }
        (["pets"], _) => Reply::empty(405),
        (["pets", id], m @ (Method::Get | Method::Delete)) => {
            let Some(id) = id.parse::<i64>().ok().filter(|id| *id >= 1) else {
                return Reply::empty(400);
            };
            if m == Method::Delete {
                return match store.pets.remove(&id) {
                    Some(_) => Reply::empty(200),
                    None => Reply::empty(404),
                };
            }
            match store.pets.get(&id) {
                Some(pet) => render_pet(pet, format),
                None if config.has(SeededFault::PhantomPet) => render_pet(
                    &Pet {
                        id,
                        name: "phantom".into(),
                        status: Some("available".into()),
                    },
                    format,
                ),
                None => Reply::empty(404),
            }
        }
        (["pets", _], _) => Reply::empty(405),
        (["user", "login"], Method::Get) => {
            let (Some(user), Some(password)) = (query.get("username"), query.get("password"))
            else {
                return Reply::empty(400);
            };
            let valid = store.users.get(user) == Some(password);
            if valid || config.has(SeededFault::Login200) {
                render_string(&format!("session-{user}"), format)
            } else {
                Reply::empty(400)
            }
        }
        (["user", "login"], _) => Reply::empty(405),
        _ => Reply::empty(404),
    }
}

fn header(request: &Request, name: &'static str) -> Option<String> {
    request
        .headers()
        .iter()
        .find(|h| h.field.equiv(name))
        .map(|h| h.value.as_str().to_string())
}

/// XML when the first acceptable known type is XML, JSON otherwise.
fn negotiate(accept: Option<&str>) -> Format {
    let Some(accept) = accept else {
        return Format::Json;
    };
    for range in accept.split(',') {
        let media = range.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        match media.as_str() {
            "application/xml" | "text/xml" => return Format::Xml,
            "application/json" | "*/*" | "application/*" => return Format::Json,
            _ => {}
        }
    }
    Format::Json
}

fn list_pets(store: &Store, status: Option<&String>, format: Format) -> Reply {
    let pets: Vec<&Pet> = store
        .pets
        .values()
        .filter(|p| status.is_none() || p.status.as_ref() == status)
        .collect();
    let body = match format {
        Format::Json => serde_json::to_vec(&pets).expect("pets serialize"),
        Format::Xml => {
            let items: String = pets.iter().map(|p| pet_xml(p)).collect();
            format!("<pets>{items}</pets>").into_bytes()
        }
    };
    Reply {
        status: 200,
        body: Some((format, body)),
    }
}

fn render_pet(pet: &Pet, format: Format) -> Reply {
    let body = match format {
        Format::Json => serde_json::to_vec(pet).expect("pet serializes"),
        Format::Xml => pet_xml(pet).into_bytes(),
    };
    Reply {
        status: 200,
        body: Some((format, body)),
    }
}

fn render_string(value: &str, format: Format) -> Reply {
    let body = match format {
        Format::Json => serde_json::to_vec(value).expect("string serializes"),
        Format::Xml => format!("<string>{}</string>", escape(value)).into_bytes(),
    };
    Reply {
        status: 200,
        body: Some((format, body)),
    }
}

fn pet_xml(pet: &Pet) -> String {
    let status = pet
        .status
        .as_deref()
        .map(|s| format!("<status>{}</status>", escape(s)))
        .unwrap_or_default();
    format!(
        "<Pet><id>{}</id><name>{}</name>{status}</Pet>",
        pet.id,
        escape(&pet.name)
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// `(name, status)` of a valid new pet in any of the accepted encodings.
fn parse_new_pet(content_type: &str, body: &[u8]) -> Option<(String, Option<String>)> {
    let media = content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    let (name, status) = match media.as_str() {
        "application/json" => {
            let value: serde_json::Value = serde_json::from_slice(body).ok()?;
            let object = value.as_object()?;
            let name = object.get("name")?.as_str()?.to_string();
            let status = match object.get("status") {
                None | Some(serde_json::Value::Null) => None,
                Some(v) => Some(v.as_str()?.to_string()),
            };
            if let Some(id) = object.get("id") {
                id.as_i64()?;
            }
            (name, status)
        }
        "application/xml" => {
            let text = std::str::from_utf8(body).ok()?;
            let doc = roxmltree::Document::parse(text).ok()?;
            let child = |tag: &str| {
                doc.root_element()
                    .children()
                    .find(|c| c.is_element() && c.tag_name().name() == tag)
                    .map(|c| c.text().unwrap_or("").trim().to_string())
            };
            (child("name")?, child("status"))
        }
        "multipart/form-data" => {
            let boundary = multipart::boundary(content_type)?;
            let parts = multipart::parse(body, &boundary)?;
            let mut name = None;
            let mut status = None;
            for part in parts {
                match part.name.as_str() {
                    "name" => name = Some(String::from_utf8(part.data.to_vec()).ok()?),
                    "status" => status = Some(String::from_utf8(part.data.to_vec()).ok()?),
                    "photo" => {
                        if !part.data.starts_with(PNG_SIGNATURE) {
                            return None;
                        }
                    }
                    _ => return None,
                }
            }
            (name?, status)
        }
        _ => return None,
    };
    if name.trim().is_empty() {
        return None;
    }
    if status.as_deref().is_some_and(|s| !STATUSES.contains(&s)) {
        return None;
    }
    Some((name, status))
}
