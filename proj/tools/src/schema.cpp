#include "omt/app/schema.hpp"

#include "json.hpp"
#include "omt/app/config.hpp"

namespace omt::app {

namespace {

// Written as JSON text so the schema reads the same in code and in output.
constexpr const char* kSchema = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "$id": "https://omt-term.invalid/run-config.schema.json",
  "title": "omt-term run config",
  "type": "object",
  "additionalProperties": false,
  "required": ["task", "model", "x0", "grid"],
  "properties": {
    "description": {"type": "string"},
    "task": {"enum": []},
    "model": {
      "type": "object",
      "additionalProperties": false,
      "minProperties": 1,
      "maxProperties": 1,
      "properties": {
        "affine": {"$ref": "#/$defs/affine"},
        "quadratic": {"$ref": "#/$defs/quadratic"}
      }
    },
    "x0": {"$ref": "#/$defs/vector"},
    "grid": {
      "type": "object",
      "additionalProperties": false,
      "required": ["T", "steps"],
      "properties": {
        "t0": {"type": "number"},
        "T": {"type": "number"},
        "steps": {"type": "integer", "minimum": 1}
      }
    },
    "riccati": {
      "type": "object",
      "additionalProperties": false,
      "properties": {"steps": {"type": "integer", "minimum": 0}}
    },
    "mc": {
      "type": "object",
      "additionalProperties": false,
      "required": ["n_paths", "seed"],
      "properties": {
        "n_paths": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0}
      }
    },
    "price_model": {
      "type": "object",
      "additionalProperties": false,
      "required": ["kind", "A_T"],
      "properties": {
        "kind": {"enum": ["APM", "QPM"]},
        "A_T": {"$ref": "#/$defs/vector"},
        "B_T": {"$ref": "#/$defs/matrix"},
        "h_T": {"type": "number"}
      }
    },
    "kernels": {
      "type": "array",
      "items": {
        "type": "object",
        "additionalProperties": false,
        "required": ["kind"],
        "properties": {
          "kind": {"enum": ["zero", "constant", "affine", "optimal"]},
          "label": {"type": "string"},
          "u": {"$ref": "#/$defs/vector"},
          "c": {"$ref": "#/$defs/vector"},
          "M": {"$ref": "#/$defs/matrix"}
        },
        "allOf": [
          {"if": {"properties": {"kind": {"const": "constant"}}}, "then": {"required": ["u"]}},
          {"if": {"properties": {"kind": {"const": "affine"}}}, "then": {"required": ["c", "M"]}}
        ]
      }
    },
    "credit": {
      "type": "object",
      "additionalProperties": false,
      "required": ["eta"],
      "properties": {
        "Lambda": {"$ref": "#/$defs/vector"},
        "lambda0": {"type": "number", "minimum": 0},
        "recovery": {"enum": ["face", "pre-default"]},
        "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "method": {"enum": ["plain_mc", "lsmc"]}
      }
    },
    "maturities": {"$ref": "#/$defs/vector"},
    "verify": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "halvings": {"type": "integer", "minimum": 1},
        "refinements": {"type": "integer", "minimum": 1},
        "n_states": {"type": "integer", "minimum": 1},
        "states": {"type": "array", "items": {"$ref": "#/$defs/vector"}}
      }
    }
  },
  "allOf": [
    {"if": {"properties": {"task": {"enum": ["price-futures", "price-forward"]}}},
     "then": {"required": ["price_model"]}},
    {"if": {"properties": {"task": {"enum": ["price-defaultable", "credit-decomposition"]}}},
     "then": {"required": ["credit", "mc"]}},
    {"if": {"properties": {"task": {"enum": ["verify-duality"]}}},
     "then": {"required": ["kernels", "mc"],
              "properties": {"kernels": {"contains": {"properties": {"kind": {"const": "optimal"}}}}}}},
    {"if": {"properties": {"task": {"enum": ["verify-fbsde", "verify-density"]}}},
     "then": {"required": ["mc"]}},
    {"if": {"properties": {"task": {"const": "verify-osc"}}},
     "then": {"properties": {"model": {"required": ["quadratic"]}}}}
  ],
  "$defs": {
    "vector": {"type": "array", "items": {"type": "number"}},
    "matrix": {"type": "array", "items": {"$ref": "#/$defs/vector"}},
    "measure_fields": {
      "required": ["atoms", "weights"],
      "properties": {
        "atoms": {"type": "array", "items": {"$ref": "#/$defs/vector"}},
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}}
      }
    },
    "affine": {
      "type": "object",
      "additionalProperties": false,
      "required": ["A", "B", "S", "alpha", "beta", "R"],
      "properties": {
        "A": {"$ref": "#/$defs/matrix"},
        "B": {"$ref": "#/$defs/vector"},
        "S": {"$ref": "#/$defs/matrix"},
        "alpha": {"$ref": "#/$defs/vector"},
        "beta": {"$ref": "#/$defs/matrix"},
        "R": {"$ref": "#/$defs/vector"},
        "k": {"type": "number"},
        "jump": {
          "type": "object",
          "additionalProperties": false,
          "$ref": "#/$defs/measure_fields",
          "required": ["L"],
          "properties": {
            "L": {"$ref": "#/$defs/vector"},
            "l": {"type": "number"},
            "atoms": true,
            "weights": true
          }
        }
      }
    },
    "quadratic": {
      "type": "object",
      "additionalProperties": false,
      "required": ["A", "B", "Sigma", "Q", "R"],
      "properties": {
        "A": {"$ref": "#/$defs/matrix"},
        "B": {"$ref": "#/$defs/vector"},
        "Sigma": {"$ref": "#/$defs/matrix"},
        "Q": {"$ref": "#/$defs/matrix"},
        "R": {"$ref": "#/$defs/vector"},
        "k": {"type": "number"},
        "jump": {
          "type": "object",
          "additionalProperties": false,
          "$ref": "#/$defs/measure_fields",
          "properties": {
            "L2": {"$ref": "#/$defs/matrix"},
            "L1": {"$ref": "#/$defs/vector"},
            "l": {"type": "number"},
            "atoms": true,
            "weights": true
          }
        }
      }
    }
  }
})json";

}  // namespace

std::string config_schema() {
  auto schema = nlohmann::ordered_json::parse(kSchema);
  auto& tasks = schema["properties"]["task"]["enum"];
  for (const auto& name : task_names()) tasks.push_back(name);
  return schema.dump(2) + "\n";
}

}  // namespace omt::app
