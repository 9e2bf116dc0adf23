use restamp_demo::{spawn, SeededFault};

struct Reply {
    status: u16,
    content_type: Option<String>,
    body: String,
}

fn call(method: &str, url: &str, accept: Option<&str>, body: Option<(&str, &[u8])>) -> Reply {
    let agent = ureq::AgentBuilder::new().redirects(0).build();
    let mut req = agent.request(method, url);
    if let Some(accept) = accept {
        req = req.set("Accept", accept);
    }
    let result = match body {
        Some((ct, bytes)) => req.set("Content-Type", ct).send_bytes(bytes),
        None => req.call(),
    };
    let resp = match result {
        Ok(r) | Err(ureq::Error::Status(_, r)) => r,
        Err(e) => panic!("transport failure: {e}"),
    };
    Reply {
        status: resp.status(),
        content_type: resp.header("Content-Type").map(str::to_string),
        body: resp.into_string().unwrap(),
    }
}

#[test]
fn login_fault_toggles_bad_password_status() {
    let clean = spawn([]).unwrap();
    let url = format!("{}/user/login?username=user1&password=wrong", clean.base_url());
    let r = call("GET", &url, None, None);
    assert_eq!(r.status, 400);
    assert_eq!(r.content_type, None);
    assert!(r.body.is_empty());

    let faulty = spawn([SeededFault::Login200]).unwrap();
    let url = format!("{}/user/login?username=user1&password=wrong", faulty.base_url());
    let r = call("GET", &url, None, None);
    assert_eq!(r.status, 200);
    assert_eq!(r.body, "\"session-user1\"");

    let ok = format!("{}/user/login?username=user1&password=secret", clean.base_url());
    assert_eq!(call("GET", &ok, Some("application/xml"), None).body, "<string>session-user1</string>");
}

#[test]
fn oversized_body_fault() {
    let big = format!(r#"{{"name": "{}"}}"#, "x".repeat(5000));
    let clean = spawn([]).unwrap();
    let r = call("POST", &format!("{}/pets", clean.base_url()), None, Some(("application/json", big.as_bytes())));
    assert_eq!(r.status, 400);
    let faulty = spawn([SeededFault::Undocumented500]).unwrap();
    let r = call("POST", &format!("{}/pets", faulty.base_url()), None, Some(("application/json", big.as_bytes())));
    assert_eq!(r.status, 500);
    assert_eq!(r.content_type, None);
}

#[test]
fn phantom_pet_fault() {
    let clean = spawn([]).unwrap();
    assert_eq!(call("GET", &format!("{}/pets/99", clean.base_url()), None, None).status, 404);
    let faulty = spawn([SeededFault::PhantomPet]).unwrap();
    let r = call("GET", &format!("{}/pets/99", faulty.base_url()), None, None);
    assert_eq!(r.status, 200);
    assert_eq!(r.body, r#"{"id":99,"name":"phantom","status":"available"}"#);
}

#[test]
fn create_get_delete_round_trip_and_reset() {
    let demo = spawn([]).unwrap();
    let base = demo.base_url();
    let created = call(
        "POST",
        &format!("{base}/pets"),
        None,
        Some(("application/json", br#"{"name": "rex", "status": "sold"}"#)),
    );
    assert_eq!(created.status, 200);
    assert_eq!(created.body, r#"{"id":3,"name":"rex","status":"sold"}"#);

    let fetched = call("GET", &format!("{base}/pets/3"), Some("application/xml"), None);
    assert_eq!(fetched.content_type.as_deref(), Some("application/xml"));
    assert_eq!(fetched.body, "<Pet><id>3</id><name>rex</name><status>sold</status></Pet>");

    assert_eq!(call("DELETE", &format!("{base}/pets/3"), None, None).status, 200);
    assert_eq!(call("GET", &format!("{base}/pets/3"), None, None).status, 404);
    assert_eq!(call("DELETE", &format!("{base}/pets/3"), None, None).status, 404);

    assert_eq!(call("DELETE", &format!("{base}/pets/1"), None, None).status, 200);
    demo.reset();
    assert_eq!(call("GET", &format!("{base}/pets/1"), None, None).status, 200);
    let again = call(
        "POST",
        &format!("{base}/pets"),
        None,
        Some(("application/xml", b"<Pet><name>max</name></Pet>")),
    );
    assert_eq!(again.body, r#"{"id":3,"name":"max"}"#, "reset restores the id counter");
}

#[test]
fn multipart_upload_requires_png_photo() {
    let demo = spawn([]).unwrap();
    let url = format!("{}/pets", demo.base_url());
    let form = |photo: &[u8]| {
        let mut body = b"--b1\r\nContent-Disposition: form-data; name=\"name\"\r\n\r\nfelix\r\n--b1\r\nContent-Disposition: form-data; name=\"photo\"; filename=\"p.png\"\r\nContent-Type: image/png\r\n\r\n".to_vec();
        body.extend_from_slice(photo);
        body.extend_from_slice(b"\r\n--b1--\r\n");
        body
    };
    let png = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/seed/assets/cat.png")).unwrap();
    let ok = call("POST", &url, None, Some(("multipart/form-data; boundary=b1", &form(&png))));
    assert_eq!(ok.status, 200);
    assert_eq!(ok.body, r#"{"id":3,"name":"felix"}"#);
    let bad = call("POST", &url, None, Some(("multipart/form-data; boundary=b1", &form(b"GIF89a"))));
    assert_eq!(bad.status, 400);
}

#[test]
fn routing_errors_and_validation() {
    let demo = spawn([]).unwrap();
    let base = demo.base_url();
    assert_eq!(call("GET", &format!("{base}/nope"), None, None).status, 404);
    assert_eq!(call("PUT", &format!("{base}/pets"), None, None).status, 405);
    assert_eq!(call("GET", &format!("{base}/pets/abc"), None, None).status, 400);
    assert_eq!(call("GET", &format!("{base}/pets/0"), None, None).status, 400);
    assert_eq!(call("GET", &format!("{base}/user/login?username=user1"), None, None).status, 400);
    let listed = call("GET", &format!("{base}/pets?status=pending"), None, None);
    assert_eq!(listed.body, r#"[{"id":2,"name":"kitty","status":"pending"}]"#);
    let none = call("GET", &format!("{base}/pets?status=lost"), Some("application/xml"), None);
    assert_eq!((none.status, none.body.as_str()), (200, "<pets></pets>"));
}
