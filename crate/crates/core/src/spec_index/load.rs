use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, IgnoredAny, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{Map, Value};

use super::{
    split_segments, HttpMethod, OperationEntry, ParamLocation, ParameterEntry, PathEntry,
    PropertyDigest, ResponseEntry, SchemaDigest, SourceVersion, SpecError, SpecIndex, ValueKind,
};

const MAX_REF_DEPTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentFormat {
    Json,
    /// The JSON-compatible YAML subset (block and flow mappings, sequences, scalars).
    Yaml,
}

impl DocumentFormat {
    /// Guess from a file extension; anything but `.yaml`/`.yml` is JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("yaml") | Some("yml") => DocumentFormat::Yaml,
            _ => DocumentFormat::Json,
        }
    }
}

pub fn load_spec_file(path: &Path) -> Result<SpecIndex, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_spec(&text, DocumentFormat::from_path(path))
}

/// Parse and normalize an OpenAPI document.
pub fn load_spec(document: &str, format: DocumentFormat) -> Result<SpecIndex, SpecError> {
    let (root, path_keys): (Value, PathKeys) = match format {
        DocumentFormat::Json => (
            serde_json::from_str(document).map_err(|e| SpecError::Parse(e.to_string()))?,
            serde_json::from_str(document).map_err(|e| SpecError::Parse(e.to_string()))?,
        ),
        DocumentFormat::Yaml => (
            serde_yaml::from_str(document).map_err(|e| SpecError::Parse(e.to_string()))?,
            serde_yaml::from_str(document).map_err(|e| SpecError::Parse(e.to_string()))?,
        ),
    };
    check_duplicate_templates(&path_keys.paths.map(|k| k.0).unwrap_or_default())?;

    let root_obj = root
        .as_object()
        .ok_or_else(|| SpecError::Invalid("document root is not an object".into()))?;
    let version = detect_dialect(root_obj)?;
    check_references(&root, &root, &mut Vec::new())?;

    let loader = Loader {
        root: &root,
        version,
    };
    let paths = loader.paths()?;
    let definitions = loader.definitions()?;
    let title = root
        .pointer("/info/title")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();

    Ok(SpecIndex {
        title,
        source_version: version,
        paths,
        definitions,
    })
}

/// Keys of the `paths` object exactly as written, duplicates included.
#[derive(Deserialize)]
struct PathKeys {
    #[serde(default)]
    paths: Option<KeyList>,
}

struct KeyList(Vec<String>);

impl<'de> Deserialize<'de> for KeyList {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct KeyVisitor;
        impl<'de> Visitor<'de> for KeyVisitor {
            type Value = KeyList;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a paths object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<KeyList, A::Error> {
                let mut keys = Vec::new();
                while let Some(key) = map.next_key::<String>()? {
                    map.next_value::<IgnoredAny>()?;
                    keys.push(key);
                }
                Ok(KeyList(keys))
            }
            fn visit_unit<E: de::Error>(self) -> Result<KeyList, E> {
                Ok(KeyList(Vec::new()))
            }
        }
        deserializer.deserialize_any(KeyVisitor)
    }
}

/// Templates are duplicates when equal after erasing parameter names.
fn check_duplicate_templates(keys: &[String]) -> Result<(), SpecError> {
    let mut seen = HashSet::new();
    for key in keys {
        let shape: Vec<&str> = split_segments(key)
            .into_iter()
            .map(|s| if super::placeholder_name(s).is_some() { "{}" } else { s })
            .collect();
        if !seen.insert(shape) {
            return Err(SpecError::DuplicatePath(key.clone()));
        }
    }
    Ok(())
}

fn detect_dialect(root: &Map<String, Value>) -> Result<SourceVersion, SpecError> {
    if let Some(v) = root.get("swagger") {
        return match v.as_str() {
            Some("2.0") => Ok(SourceVersion::Swagger2),
            _ => Err(SpecError::UnsupportedDialect(format!("swagger {v}"))),
        };
    }
    match root.get("openapi").and_then(Value::as_str) {
        Some(v) if v.starts_with("3.") => Ok(SourceVersion::OpenApi3),
        Some(v) => Err(SpecError::UnsupportedDialect(format!("openapi {v}"))),
        None => Err(SpecError::UnsupportedDialect(
            "missing `swagger` or `openapi` version field".into(),
        )),
    }
}

/// Every `$ref` in the document must be local and must resolve.
fn check_references(root: &Value, node: &Value, trail: &mut Vec<String>) -> Result<(), SpecError> {
    match node {
        Value::Object(map) => {
            if let Some(r) = map.get("$ref") {
                let target = r
                    .as_str()
                    .ok_or_else(|| SpecError::Reference("`$ref` is not a string".into()))?;
                pointer_target(root, target)?;
            }
            for (k, v) in map {
                trail.push(k.clone());
                check_references(root, v, trail)?;
                trail.pop();
            }
        }
        Value::Array(items) => {
            for v in items {
                check_references(root, v, trail)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn pointer_target<'a>(root: &'a Value, reference: &str) -> Result<&'a Value, SpecError> {
    let pointer = reference.strip_prefix('#').ok_or_else(|| {
        SpecError::Reference(format!("remote reference `{reference}` is not supported"))
    })?;
    root.pointer(pointer)
        .ok_or_else(|| SpecError::Reference(format!("dangling reference `{reference}`")))
}

/// Last segment of a `#/definitions/X` or `#/components/schemas/X` pointer.
fn definition_name(reference: &str) -> Option<String> {
    ["#/definitions/", "#/components/schemas/"]
        .iter()
        .find_map(|prefix| reference.strip_prefix(prefix))
        .map(|s| s.replace("~1", "/").replace("~0", "~"))
}

struct Loader<'a> {
    root: &'a Value,
    version: SourceVersion,
}

impl<'a> Loader<'a> {
    fn resolve(&self, mut node: &'a Value) -> Result<&'a Value, SpecError> {
        for _ in 0..MAX_REF_DEPTH {
            match node.get("$ref").and_then(Value::as_str) {
                Some(r) => node = pointer_target(self.root, r)?,
                None => return Ok(node),
            }
        }
        Err(SpecError::Reference("reference cycle".into()))
    }

    fn paths(&self) -> Result<Vec<PathEntry>, SpecError> {
        let Some(paths) = self.root.get("paths") else {
            return Ok(Vec::new());
        };
        let paths = match paths {
            Value::Null => return Ok(Vec::new()),
            Value::Object(map) => map,
            _ => return Err(SpecError::Invalid("`paths` is not an object".into())),
        };
        let mut entries = Vec::with_capacity(paths.len());
        for (template, item) in paths {
            if !template.starts_with('/') {
                return Err(SpecError::Invalid(format!(
                    "path template `{template}` does not begin with '/'"
                )));
            }
            let item = self.resolve(item)?;
            let shared = self.raw_parameters(item.get("parameters"))?;
            let mut operations = BTreeMap::new();
            for method in HttpMethod::ALL {
                let key = method.as_str().to_ascii_lowercase();
                if let Some(op) = item.get(&key) {
                    let op = self.operation(template, method, self.resolve(op)?, &shared)?;
                    operations.insert(method, op);
                }
            }
            entries.push(PathEntry {
                template: template.clone(),
                operations,
            });
        }
        Ok(entries)
    }

    fn raw_parameters(&self, list: Option<&'a Value>) -> Result<Vec<&'a Value>, SpecError> {
        let Some(list) = list else {
            return Ok(Vec::new());
        };
        let items = list
            .as_array()
            .ok_or_else(|| SpecError::Invalid("`parameters` is not an array".into()))?;
        items.iter().map(|p| self.resolve(p)).collect()
    }

    fn operation(
        &self,
        template: &str,
        method: HttpMethod,
        op: &'a Value,
        shared: &[&'a Value],
    ) -> Result<OperationEntry, SpecError> {
        let own = self.raw_parameters(op.get("parameters"))?;
        // Operation-level parameters override path-level ones with the same (name, in).
        let mut merged: Vec<&Value> = Vec::new();
        for p in shared.iter().chain(own.iter()) {
            let key = (p.get("name"), p.get("in"));
            if let Some(slot) = merged
                .iter_mut()
                .find(|q| (q.get("name"), q.get("in")) == key)
            {
                *slot = p;
            } else {
                merged.push(p);
            }
        }

        let mut parameters = Vec::new();
        let mut body_schema: Option<&Value> = None;
        let mut has_body_param = false;
        let mut has_form = false;
        let mut has_file = false;
        for p in merged {
            let name = p
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| SpecError::Invalid(format!("{method} {template}: parameter without name")))?;
            let location = match p.get("in").and_then(Value::as_str) {
                Some("path") => ParamLocation::Path,
                Some("query") => ParamLocation::Query,
                Some("header") => ParamLocation::Header,
                Some("formData") => {
                    has_form = true;
                    ParamLocation::Form
                }
                Some("body") => {
                    has_body_param = true;
                    body_schema = p.get("schema");
                    continue;
                }
                // Cookie parameters are outside the modeled surface.
                Some("cookie") => continue,
                other => {
                    return Err(SpecError::Invalid(format!(
                        "{method} {template}: parameter `{name}` has unsupported location {other:?}"
                    )))
                }
            };
            let schema = match self.version {
                SourceVersion::OpenApi3 => match p.get("schema") {
                    Some(s) => self.resolve(s)?,
                    None => p,
                },
                SourceVersion::Swagger2 => p,
            };
            let value_kind = self.value_kind(schema)?;
            has_file |= value_kind.kind == "file";
            let required = location == ParamLocation::Path
                || p.get("required").and_then(Value::as_bool).unwrap_or(false);
            if parameters
                .iter()
                .any(|e: &ParameterEntry| e.name == name && e.location == location)
            {
                return Err(SpecError::Invalid(format!(
                    "{method} {template}: duplicate {location} parameter `{name}`"
                )));
            }
            parameters.push(ParameterEntry {
                name: name.to_string(),
                location,
                required,
                value_kind,
            });
        }

        let mut request_types = BTreeSet::new();
        let mut request_schema_ref = None;
        match self.version {
            SourceVersion::OpenApi3 => {
                if let Some(body) = op.get("requestBody") {
                    let body = self.resolve(body)?;
                    if let Some(content) = body.get("content").and_then(Value::as_object) {
                        for (media, entry) in content {
                            request_types.insert(media.clone());
                            if request_schema_ref.is_none() {
                                request_schema_ref = entry.get("schema").and_then(schema_ref_name);
                            }
                        }
                    }
                }
            }
            SourceVersion::Swagger2 => {
                if has_body_param || has_form {
                    let consumes = self.media_list(op, "consumes");
                    let fallback = if has_body_param {
                        "application/json"
                    } else if has_file {
                        "multipart/form-data"
                    } else {
                        "application/x-www-form-urlencoded"
                    };
                    if consumes.is_empty() {
                        request_types.insert(fallback.to_string());
                    } else {
                        request_types.extend(consumes);
                    }
                    request_schema_ref = body_schema.and_then(schema_ref_name);
                }
            }
        }
        if !request_types.is_empty() && !method.bears_body() {
            return Err(SpecError::Invalid(format!(
                "{method} {template}: request body declared on a method without a payload"
            )));
        }

        let mut responses = BTreeMap::new();
        if let Some(map) = op.get("responses").and_then(Value::as_object) {
            for (code, response) in map {
                if code == "default" {
                    continue;
                }
                let status: u16 = code
                    .parse()
                    .ok()
                    .filter(|s| (100..=599).contains(s))
                    .ok_or_else(|| {
                        SpecError::Invalid(format!("{method} {template}: invalid status code `{code}`"))
                    })?;
                let response = self.resolve(response)?;
                let description = response
                    .get("description")
                    .and_then(Value::as_str)
                    .unwrap_or("")
                    .to_string();
                let mut content_types = BTreeSet::new();
                let mut schema_ref = None;
                match self.version {
                    SourceVersion::OpenApi3 => {
                        if let Some(content) = response.get("content").and_then(Value::as_object) {
                            for (media, entry) in content {
                                content_types.insert(media.clone());
                                if schema_ref.is_none() {
                                    schema_ref = entry.get("schema").and_then(schema_ref_name);
                                }
                            }
                        }
                    }
                    SourceVersion::Swagger2 => {
                        if let Some(schema) = response.get("schema") {
                            let produces = self.media_list(op, "produces");
                            if produces.is_empty() {
                                content_types.insert("application/json".to_string());
                            } else {
                                content_types.extend(produces);
                            }
                            schema_ref = schema_ref_name(schema);
                        }
                    }
                }
                responses.insert(
                    status,
                    ResponseEntry {
                        status,
                        description,
                        content_types,
                        schema_ref,
                    },
                );
            }
        }

        Ok(OperationEntry {
            method,
            operation_id: op
                .get("operationId")
                .and_then(Value::as_str)
                .map(str::to_string),
            summary: op.get("summary").and_then(Value::as_str).map(str::to_string),
            parameters,
            request_types,
            request_schema_ref,
            responses,
        })
    }

    /// Operation-level list, falling back to the document-level list.
    fn media_list(&self, op: &Value, key: &str) -> Vec<String> {
        op.get(key)
            .or_else(|| self.root.get(key))
            .and_then(Value::as_array)
            .map(|items| {
                items
                    .iter()
                    .filter_map(Value::as_str)
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    }

    fn value_kind(&self, schema: &Value) -> Result<ValueKind, SpecError> {
        if let Some(name) = schema
            .get("$ref")
            .and_then(Value::as_str)
            .and_then(definition_name)
        {
            return Ok(ValueKind {
                kind: name,
                ..ValueKind::default()
            });
        }
        let schema = self.resolve(schema)?;
        let mut kind = schema
            .get("type")
            .and_then(Value::as_str)
            .unwrap_or("object")
            .to_string();
        if kind == "array" {
            if let Some(items) = schema.get("items") {
                kind = format!("array<{}>", self.value_kind(items)?.kind);
            }
        }
        Ok(ValueKind {
            kind,
            format: schema
                .get("format")
                .and_then(Value::as_str)
                .map(str::to_string),
            enum_values: schema
                .get("enum")
                .and_then(Value::as_array)
                .map(|vals| vals.iter().map(literal_text).collect())
                .unwrap_or_default(),
            minimum: schema.get("minimum").and_then(Value::as_f64),
            maximum: schema.get("maximum").and_then(Value::as_f64),
        })
    }

    fn definitions(&self) -> Result<BTreeMap<String, SchemaDigest>, SpecError> {
        let table = match self.version {
            SourceVersion::Swagger2 => self.root.get("definitions"),
            SourceVersion::OpenApi3 => self.root.pointer("/components/schemas"),
        };
        let mut out = BTreeMap::new();
        let Some(table) = table.and_then(Value::as_object) else {
            return Ok(out);
        };
        for (name, schema) in table {
            let schema = self.resolve(schema)?;
            let required: HashSet<&str> = schema
                .get("required")
                .and_then(Value::as_array)
                .map(|r| r.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            let mut properties = Vec::new();
            let mut example_values = BTreeMap::new();
            if let Some(props) = schema.get("properties").and_then(Value::as_object) {
                for (prop, prop_schema) in props {
                    properties.push(PropertyDigest {
                        name: prop.clone(),
                        kind: self.value_kind(prop_schema)?,
                        required: required.contains(prop.as_str()),
                    });
                    if let Some(example) = prop_schema.get("example") {
                        example_values.insert(prop.clone(), literal_text(example));
                    }
                }
            }
            if let Some(example) = schema.get("example").and_then(Value::as_object) {
                for (k, v) in example {
                    example_values
                        .entry(k.clone())
                        .or_insert_with(|| literal_text(v));
                }
            }
            out.insert(
                name.clone(),
                SchemaDigest {
                    name: name.clone(),
                    properties,
                    example_values,
                },
            );
        }
        Ok(out)
    }
}

/// Definition named by a schema's `$ref`, or by its array items' `$ref`.
fn schema_ref_name(schema: &Value) -> Option<String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        return definition_name(r);
    }
    schema
        .get("items")
        .and_then(|items| items.get("$ref"))
        .and_then(Value::as_str)
        .and_then(definition_name)
}

fn literal_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
