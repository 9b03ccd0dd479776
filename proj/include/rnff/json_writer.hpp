#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

namespace rnff {

/// Formats a double with 12 significant digits (%.12g, round-half-even),
/// the serialization used for every float in reports and CSV files so that
/// outputs are byte-stable across runs.
std::string format_g12(double v);

/// Minimal streaming JSON writer with insertion-ordered keys, 2-space
/// indentation, and format_g12 for numbers. nlohmann::json handles parsing;
/// writing goes through this so report bytes are fully pinned.
class JsonWriter {
  public:
    std::string str() const { return out_; }

    void begin_object();
    void end_object();
    void begin_array();
    void end_array();

    void key(const std::string& k);

    void value(double v);
    void value(bool v);
    void value(const std::string& v);
    void value(const char* v) { value(std::string(v)); }
    template <class T, std::enable_if_t<std::is_integral_v<T> && !std::is_same_v<T, bool>,
                                        int> = 0>
    void value(T v) {
        raw(std::to_string(v));
    }
    void null();

    template <class T>
    void kv(const std::string& k, const T& v) {
        key(k);
        value(v);
    }

    /// NaN serializes as null (used for gamma/U_alpha when inadmissible).
    void kv_or_null(const std::string& k, double v);

    void kv(const std::string& k, const std::vector<double>& vs);

  private:
    void raw(const std::string& text);
    void prepare_value();
    void newline_indent();

    std::string out_;
    std::vector<bool> container_is_object_;
    std::vector<bool> container_empty_;
    bool pending_key_ = false;
};

} // namespace rnff
