use serde_json::{json, Value};

fn error(description: &str) -> Value {
    json!({
        "description": description,
        "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Error" } } }
    })
}

fn id_param(name: &str) -> Value {
    json!({ "name": name, "in": "path", "required": true, "schema": { "type": "string" } })
}

pub fn document() -> Value {
    let png = json!({ "image/png": { "schema": { "type": "string", "format": "binary" } } });
    json!({
        "openapi": "3.0.3",
        "info": { "title": "otseg service", "version": env!("CARGO_PKG_VERSION") },
        "paths": {
            "/sessions": {
                "post": {
                    "summary": "Create a session from an uploaded image",
                    "requestBody": { "required": true, "content": {
                        "image/png": { "schema": { "type": "string", "format": "binary" } },
                        "image/jpeg": { "schema": { "type": "string", "format": "binary" } }
                    } },
                    "responses": {
                        "201": { "description": "Created", "content": { "application/json": {
                            "schema": { "$ref": "#/components/schemas/SessionCreated" } } } },
                        "415": error("Unreadable or unsupported image"),
                        "422": error("Empty image")
                    }
                }
            },
            "/sessions/{id}": {
                "parameters": [id_param("id")],
                "get": { "summary": "Session metadata", "responses": {
                    "200": { "description": "Session", "content": { "application/json": {
                        "schema": { "$ref": "#/components/schemas/Session" } } } },
                    "404": error("Unknown session") } },
                "delete": { "summary": "Drop a session", "responses": { "204": { "description": "Deleted" } } }
            },
            "/sessions/{id}/scribbles": {
                "parameters": [id_param("id")],
                "put": {
                    "summary": "Replace the scribble mask (PNG) or paint strokes (JSON)",
                    "requestBody": { "required": true, "content": {
                        "image/png": { "schema": { "type": "string", "format": "binary" } },
                        "application/json": { "schema": { "$ref": "#/components/schemas/StrokeList" } }
                    } },
                    "responses": {
                        "204": { "description": "Stored" },
                        "404": error("Unknown session"),
                        "415": error("Unsupported content type or unreadable mask"),
                        "422": error("Mask size mismatch or malformed stroke list")
                    }
                },
                "get": {
                    "summary": "Strokes since the last mask upload, or the mask itself",
                    "parameters": [{ "name": "format", "in": "query", "schema": { "type": "string", "enum": ["json", "png"] } }],
                    "responses": {
                        "200": { "description": "Scribbles", "content": {
                            "application/json": { "schema": { "$ref": "#/components/schemas/Scribbles" } },
                            "image/png": { "schema": { "type": "string", "format": "binary" } } } },
                        "404": error("Unknown session")
                    }
                }
            },
            "/sessions/{id}/solve": {
                "parameters": [id_param("id")],
                "post": {
                    "summary": "Queue a solve; cancels the session's previous job",
                    "requestBody": { "required": false, "content": { "application/json": {
                        "schema": { "$ref": "#/components/schemas/SolveRequest" } } } },
                    "responses": {
                        "202": { "description": "Queued", "content": { "application/json": {
                            "schema": { "type": "object", "properties": { "job_id": { "type": "string" } } } } } },
                        "404": error("Unknown session"),
                        "409": error("Fewer than two labels scribbled"),
                        "422": error("Invalid configuration")
                    }
                }
            },
            "/sessions/{id}/result": {
                "parameters": [id_param("id")],
                "get": {
                    "summary": "Latest result as a 16-bit probability map or a label map",
                    "parameters": [
                        { "name": "format", "in": "query", "schema": { "type": "string", "enum": ["prob16", "labels"], "default": "prob16" } },
                        { "name": "threshold", "in": "query", "schema": { "type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1 } },
                        { "name": "phase", "in": "query", "schema": { "type": "integer", "minimum": 0, "default": 0 } }
                    ],
                    "responses": {
                        "200": { "description": "PNG; header X-Phases gives the number of maps", "content": png },
                        "400": error("Bad query"),
                        "404": error("Unknown session or no result")
                    }
                }
            },
            "/jobs/{id}": {
                "parameters": [id_param("id")],
                "get": { "summary": "Job status", "responses": {
                    "200": { "description": "Status", "content": { "application/json": {
                        "schema": { "$ref": "#/components/schemas/Job" } } } },
                    "404": error("Unknown job") } },
                "delete": { "summary": "Cancel at the next iteration boundary", "responses": {
                    "200": { "description": "Status after the request", "content": { "application/json": {
                        "schema": { "$ref": "#/components/schemas/Job" } } } },
                    "404": error("Unknown job") } }
            },
            "/spec": { "get": { "summary": "This document", "responses": { "200": { "description": "OpenAPI document" } } } }
        },
        "components": { "schemas": {
            "Error": { "type": "object", "required": ["error"], "properties": { "error": { "type": "string" } } },
            "SessionCreated": { "type": "object", "required": ["session_id", "width", "height"], "properties": {
                "session_id": { "type": "string" }, "width": { "type": "integer" }, "height": { "type": "integer" } } },
            "Session": { "type": "object", "properties": {
                "session_id": { "type": "string" }, "width": { "type": "integer" }, "height": { "type": "integer" },
                "labels": { "type": "integer" }, "latest_job": { "type": "string", "nullable": true },
                "has_result": { "type": "boolean" }, "created": { "type": "integer" }, "updated": { "type": "integer" } } },
            "Stroke": { "type": "object", "required": ["label", "points"], "additionalProperties": false, "properties": {
                "label": { "type": "integer", "minimum": 0, "maximum": 255, "description": "0 erases" },
                "radius": { "type": "integer", "minimum": 0, "default": 0 },
                "points": { "type": "array", "items": { "type": "array", "items": { "type": "integer" }, "minItems": 2, "maxItems": 2 },
                    "description": "[x, y] pixel coordinates" } } },
            "StrokeList": { "type": "object", "required": ["strokes"], "additionalProperties": false, "properties": {
                "strokes": { "type": "array", "items": { "$ref": "#/components/schemas/Stroke" } },
                "clear": { "type": "boolean", "default": false } } },
            "Scribbles": { "type": "object", "properties": {
                "width": { "type": "integer" }, "height": { "type": "integer" }, "labels": { "type": "integer" },
                "strokes": { "type": "array", "items": { "$ref": "#/components/schemas/Stroke" } } } },
            "SolveRequest": { "type": "object", "additionalProperties": false, "properties": {
                "features": { "type": "object", "additionalProperties": false, "properties": {
                    "features": { "type": "string", "enum": ["rgb", "gradnorm"] },
                    "bins": { "type": "integer", "minimum": 1, "nullable": true },
                    "seed": { "type": "integer" }, "kmeans_iter": { "type": "integer" } } },
                "solver": { "type": "object", "additionalProperties": false, "properties": {
                    "variant": { "type": "string", "enum": ["l1", "mk_exact", "sinkhorn_grad", "sinkhorn_prox"] },
                    "rho": { "type": "number" }, "lambda": { "type": "number" },
                    "cost": { "type": "object" },
                    "precond_r": { "type": "number" }, "precond_delta": { "type": "number" }, "precond_gamma": { "type": "number" },
                    "tol": { "type": "number" }, "max_iter": { "type": "integer" },
                    "threshold": { "type": "number" }, "mk_exact_max_bins": { "type": "integer" } } } } },
            "Job": { "type": "object", "properties": {
                "job_id": { "type": "string" }, "session_id": { "type": "string" },
                "status": { "type": "string", "enum": ["queued", "running", "done", "failed", "cancelled"] },
                "iteration": { "type": "integer" }, "max_iter": { "type": "integer" },
                "progress": { "type": "number", "description": "iteration / max_iter; 1 when done" },
                "error": { "type": "string", "nullable": true },
                "summary": { "type": "object", "nullable": true } } }
        } }
    })
}
