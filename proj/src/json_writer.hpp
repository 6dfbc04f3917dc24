#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace sace {

// Minimal ordered JSON emitter. Doubles are serialized with 17 significant
// digits so every value round-trips exactly; nlohmann is used for parsing
// config input, this writer owns the report output format.
class JsonWriter {
 public:
  std::string str() const { return out_; }

  JsonWriter& begin_object() {
    separator();
    out_ += '{';
    fresh_ = true;
    return *this;
  }
  JsonWriter& end_object() {
    out_ += '}';
    fresh_ = false;
    return *this;
  }
  JsonWriter& begin_array() {
    separator();
    out_ += '[';
    fresh_ = true;
    return *this;
  }
  JsonWriter& end_array() {
    out_ += ']';
    fresh_ = false;
    return *this;
  }
  JsonWriter& key(const std::string& k) {
    separator();
    append_string(k);
    out_ += ':';
    fresh_ = true;
    return *this;
  }
  JsonWriter& value(const std::string& v) {
    separator();
    append_string(v);
    return *this;
  }
  JsonWriter& value(const char* v) { return value(std::string(v)); }
  JsonWriter& value(double v) {
    separator();
    if (v != v) {
      out_ += "null";  // NaN has no JSON representation
      return *this;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out_ += buf;
    return *this;
  }
  JsonWriter& value(int v) {
    separator();
    out_ += std::to_string(v);
    return *this;
  }
  JsonWriter& value(long long v) {
    separator();
    out_ += std::to_string(v);
    return *this;
  }
  JsonWriter& value(unsigned long long v) {
    separator();
    out_ += std::to_string(v);
    return *this;
  }
  JsonWriter& value(bool v) {
    separator();
    out_ += v ? "true" : "false";
    return *this;
  }

 private:
  void separator() {
    if (!fresh_ && !out_.empty()) {
      const char last = out_.back();
      if (last != '{' && last != '[' && last != ':') out_ += ',';
    }
    fresh_ = false;
  }
  void append_string(const std::string& s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\r': out_ += "\\r"; break;
        case '\t': out_ += "\\t"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += c;
          }
      }
    }
    out_ += '"';
  }

  std::string out_;
  bool fresh_ = true;
};

}  // namespace sace
