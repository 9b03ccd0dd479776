#include "rnff/json_writer.hpp"

#include <cmath>
#include <cstdio>

namespace rnff {

std::string format_g12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void JsonWriter::newline_indent() {
    out_ += '\n';
    out_.append(2 * container_is_object_.size(), ' ');
}

void JsonWriter::prepare_value() {
    if (pending_key_) {
        pending_key_ = false;
        return;
    }
    if (container_is_object_.empty()) return;
    if (!container_empty_.back()) out_ += ',';
    container_empty_.back() = false;
    newline_indent();
}

void JsonWriter::begin_object() {
    prepare_value();
    out_ += '{';
    container_is_object_.push_back(true);
    container_empty_.push_back(true);
}

void JsonWriter::end_object() {
    const bool was_empty = container_empty_.back();
    container_is_object_.pop_back();
    container_empty_.pop_back();
    if (!was_empty) newline_indent();
    out_ += '}';
}

void JsonWriter::begin_array() {
    prepare_value();
    out_ += '[';
    container_is_object_.push_back(false);
    container_empty_.push_back(true);
}

void JsonWriter::end_array() {
    const bool was_empty = container_empty_.back();
    container_is_object_.pop_back();
    container_empty_.pop_back();
    if (!was_empty) newline_indent();
    out_ += ']';
}

void JsonWriter::key(const std::string& k) {
    if (!container_empty_.back()) out_ += ',';
    container_empty_.back() = false;
    newline_indent();
    out_ += '"';
    out_ += k;
    out_ += "\": ";
    pending_key_ = true;
}

void JsonWriter::raw(const std::string& text) {
    prepare_value();
    out_ += text;
}

void JsonWriter::value(double v) {
    prepare_value();
    out_ += format_g12(v);
}

void JsonWriter::value(bool v) {
    prepare_value();
    out_ += v ? "true" : "false";
}

void JsonWriter::value(const std::string& v) {
    prepare_value();
    out_ += '"';
    for (char c : v) {
        if (c == '"' || c == '\\') out_ += '\\';
        out_ += c;
    }
    out_ += '"';
}

void JsonWriter::null() {
    prepare_value();
    out_ += "null";
}

void JsonWriter::kv_or_null(const std::string& k, double v) {
    key(k);
    if (std::isnan(v))
        null();
    else
        value(v);
}

void JsonWriter::kv(const std::string& k, const std::vector<double>& vs) {
    key(k);
    begin_array();
    for (double v : vs) value(v);
    end_array();
}

} // namespace rnff
