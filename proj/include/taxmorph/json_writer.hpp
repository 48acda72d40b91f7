// Streaming JSON writer with caller-controlled key order and verbatim number
// text. Parsing goes through nlohmann::json; output goes through here so that
// money renders as 2168.00 and reports are byte-stable.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "taxmorph/decimal.hpp"

namespace taxmorph {

class JsonWriter {
 public:
  /// indent < 0 writes a single line.
  explicit JsonWriter(int indent = -1) : indent_(indent) {}

  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);

  JsonWriter& value(std::string_view text);
  JsonWriter& value(const char* text) { return value(std::string_view(text)); }
  JsonWriter& value(const std::string& text) { return value(std::string_view(text)); }
  JsonWriter& value(bool flag);
  JsonWriter& value(std::int64_t number);
  JsonWriter& value(int number) { return value(static_cast<std::int64_t>(number)); }
  JsonWriter& null();
  /// Emits already-formatted number text as-is.
  JsonWriter& raw_number(std::string_view text);
  /// Splices an already-serialized JSON document.
  JsonWriter& raw_json(std::string_view text);

  JsonWriter& money(Money m) { return raw_number(m.fixed()); }
  JsonWriter& rate(double r);

  const std::string& str() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  void before_value();
  void newline();

  struct Frame {
    bool is_object;
    bool empty;
  };
  int indent_;
  std::string out_;
  std::vector<Frame> stack_;
  bool after_key_ = false;
};

/// Six-decimal fixed rendering used for rates in reports.
std::string format_rate(double r);

}  // namespace taxmorph
