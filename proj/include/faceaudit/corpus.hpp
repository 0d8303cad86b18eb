#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "faceaudit/csv.hpp"
#include "faceaudit/error.hpp"
#include "faceaudit/util.hpp"

namespace faceaudit {

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

enum class Modality { image, text };

inline std::string_view to_string(Modality m) { return m == Modality::image ? "image" : "text"; }

inline Modality parse_modality(std::string_view s) {
    if (s == "image") return Modality::image;
    if (s == "text") return Modality::text;
    throw FormatError("unknown modality '" + std::string(s) + "'");
}

struct EmbeddingMeta {
    std::string model_id;
    Modality modality = Modality::image;
    std::string source;
    // Additional top-level keys carried through the metadata block verbatim.
    nlohmann::json extra = nlohmann::json::object();

    friend bool operator==(const EmbeddingMeta&, const EmbeddingMeta&) = default;
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
        if (len == 0 || i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        }
        i += len;
    }
    return true;
}

} // namespace detail

/// Named rows of fixed-dimension float vectors. Immutable once constructed;
/// the constructor enforces every invariant.
class EmbeddingMatrix {
public:
    EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim, std::vector<float> values,
                    std::optional<EmbeddingMeta> meta = std::nullopt)
        : ids_(std::move(ids)), dim_(dim), values_(std::move(values)), meta_(std::move(meta)) {
        if (meta_ && meta_->extra.is_null()) meta_->extra = nlohmann::json::object();
        if (meta_ && !meta_->extra.is_object()) throw ValidationError("embedding metadata extras must be a JSON object");
        if (dim_ == 0) throw ValidationError("embedding dim must be >= 1");
        if (dim_ > UINT32_MAX) throw ValidationError("embedding dim exceeds u32");
        if (ids_.empty()) throw ValidationError("embedding matrix has zero rows");
        if (values_.size() != ids_.size() * dim_) {
            throw ValidationError("embedding payload has " + std::to_string(values_.size()) +
                                  " values, expected " + std::to_string(ids_.size() * dim_));
        }
        index_.reserve(ids_.size());
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            const auto& id = ids_[i];
            if (id.empty()) throw ValidationError("empty row id at index " + std::to_string(i));
            if (id.size() > UINT16_MAX) throw ValidationError("row id longer than 65535 bytes");
            if (!detail::valid_utf8(id)) throw ValidationError("row id is not valid UTF-8 at index " + std::to_string(i));
            if (!index_.emplace(id, i).second) throw ValidationError("duplicate row id '" + id + "'");
        }
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (!std::isfinite(values_[k])) {
                throw ValidationError("non-finite value in row '" + ids_[k / dim_] + "'");
            }
        }
    }

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t count() const noexcept { return ids_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    const std::optional<EmbeddingMeta>& meta() const noexcept { return meta_; }

    std::span<const float> row(std::size_t i) const { return std::span<const float>(values_).subspan(i * dim_, dim_); }

    std::optional<std::size_t> find(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::span<const float> row(const std::string& id) const {
        auto i = find(id);
        if (!i) throw ValidationError("no row '" + id + "'");
        return row(*i);
    }

    /// Rows for `ids` in the given order; every id must exist.
    EmbeddingMatrix select(const std::vector<std::string>& ids) const {
        std::vector<float> values;
        values.reserve(ids.size() * dim_);
        for (const auto& id : ids) {
            auto r = row(id);
            values.insert(values.end(), r.begin(), r.end());
        }
        return EmbeddingMatrix(ids, dim_, std::move(values), meta_);
    }

    friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
        if (a.ids_ != b.ids_ || a.dim_ != b.dim_ || a.meta_ != b.meta_) return false;
        // Bitwise: distinguishes -0.0 from 0.0.
        return a.values_.size() == b.values_.size() &&
               std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0;
    }

private:
    std::vector<std::string> ids_;
    std::size_t dim_;
    std::vector<float> values_;
    std::optional<EmbeddingMeta> meta_;
    std::unordered_map<std::string, std::size_t> index_;
};

// EMB1 layout, little-endian, no padding:
//   "EMB1" | u32 version=1 | u32 dim | u64 count
//   count × ( u16 id_len | id bytes | dim × f32 )
//   [ u32 meta_len | meta_len bytes of UTF-8 JSON ]   (omitted when meta is absent)
namespace emb1 {

inline constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

template <class T>
void put(std::vector<unsigned char>& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<unsigned char>(value >> (8 * b)));
}

class Cursor {
public:
    explicit Cursor(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    template <class T>
    T get(const char* what) {
        static_assert(std::is_unsigned_v<T>);
        need(sizeof(T), what);
        T value = 0;
        for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(bytes_[pos_ + b]) << (8 * b);
        pos_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n, const char* what) {
        need(n, what);
        std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(std::string("truncated EMB1 payload while reading ") + what + " at byte " +
                              std::to_string(pos_));
        }
    }

    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline nlohmann::json meta_to_json(const EmbeddingMeta& meta) {
    nlohmann::json j = meta.extra.is_object() ? meta.extra : nlohmann::json::object();
    j["model_id"] = meta.model_id;
    j["modality"] = std::string(to_string(meta.modality));
    j["source"] = meta.source;
    return j;
}

inline EmbeddingMeta meta_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("EMB1 metadata is not a JSON object");
    EmbeddingMeta meta;
    auto text = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw FormatError(std::string("EMB1 metadata lacks string '") + key + "'");
        return it->get<std::string>();
    };
    meta.model_id = text("model_id");
    meta.modality = parse_modality(text("modality"));
    meta.source = text("source");
    meta.extra = j;
    meta.extra.erase("model_id");
    meta.extra.erase("modality");
    meta.extra.erase("source");
    return meta;
}

inline std::vector<unsigned char> encode(const EmbeddingMatrix& m) {
    std::vector<unsigned char> out;
    out.reserve(20 + m.count() * (2 + 16 + 4 * m.dim()));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    detail::put<std::uint32_t>(out, kVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
    detail::put<std::uint64_t>(out, m.count());
    for (std::size_t i = 0; i < m.count(); ++i) {
        const auto& id = m.ids()[i];
        detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
        out.insert(out.end(), id.begin(), id.end());
        for (float v : m.row(i)) detail::put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
    if (m.meta()) {
        std::string json = meta_to_json(*m.meta()).dump();
        if (json.size() > UINT32_MAX) throw ValidationError("EMB1 metadata too large");
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(json.size()));
        out.insert(out.end(), json.begin(), json.end());
    }
    return out;
}

inline EmbeddingMatrix decode(std::span<const unsigned char> bytes) {
    detail::Cursor cur(bytes);
    if (cur.remaining() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad EMB1 magic");
    cur.take(4, "magic");
    auto version = cur.get<std::uint32_t>("version");
    if (version != kVersion) throw FormatError("unsupported EMB1 version " + std::to_string(version));
    auto dim = cur.get<std::uint32_t>("dim");
    auto count = cur.get<std::uint64_t>("count");
    if (dim == 0) throw ValidationError("EMB1 dim is zero");
    if (count == 0) throw ValidationError("EMB1 file has zero rows");
    // Each row needs at least 2 + 4*dim bytes; reject absurd counts before allocating.
    if (count > cur.remaining() / (2 + 4ull * dim)) throw FormatError("truncated EMB1 payload: count exceeds file size");

    std::vector<std::string> ids;
    std::vector<float> values;
    ids.reserve(count);
    values.reserve(count * dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        auto len = cur.get<std::uint16_t>("id length");
        ids.emplace_back(cur.take(len, "id"));
        for (std::uint32_t k = 0; k < dim; ++k) values.push_back(std::bit_cast<float>(cur.get<std::uint32_t>("row values")));
    }

    std::optional<EmbeddingMeta> meta;
    if (cur.remaining() > 0) {
        auto len = cur.get<std::uint32_t>("metadata length");
        auto text = cur.take(len, "metadata");
        if (cur.remaining() != 0) throw FormatError("trailing bytes after EMB1 metadata");
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw FormatError("EMB1 metadata is not valid JSON");
        meta = meta_from_json(j);
    }
    return EmbeddingMatrix(std::move(ids), dim, std::move(values), std::move(meta));
}

} // namespace emb1

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return emb1::decode(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

inline void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
    auto bytes = emb1::encode(matrix);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Ratings
// ---------------------------------------------------------------------------

struct RatingScale {
    double min = 0.0;
    double max = 100.0;
    double midpoint = 50.0;

    void validate() const {
        if (!(std::isfinite(min) && std::isfinite(max) && std::isfinite(midpoint)) || !(min < midpoint && midpoint < max)) {
            throw ValidationError("rating scale requires min < midpoint < max, got {" + format_real(min) + ", " +
                                  format_real(max) + ", " + format_real(midpoint) + "}");
        }
    }
    friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

/// Dense image × attribute table of mean human ratings.
class RatingsTable {
public:
    RatingsTable(std::vector<std::string> image_ids, std::vector<std::string> attributes, std::vector<double> values,
                 RatingScale scale)
        : image_ids_(std::move(image_ids)), attributes_(std::move(attributes)), values_(std::move(values)), scale_(scale) {
        scale_.validate();
        if (image_ids_.empty() || attributes_.empty()) throw ValidationError("ratings table is empty");
        if (values_.size() != image_ids_.size() * attributes_.size()) throw ValidationError("ratings table is not dense");
        for (std::size_t i = 0; i < image_ids_.size(); ++i) {
            if (!image_index_.emplace(image_ids_[i], i).second) throw ValidationError("duplicate image id '" + image_ids_[i] + "'");
        }
        for (std::size_t a = 0; a < attributes_.size(); ++a) {
            if (!attribute_index_.emplace(attributes_[a], a).second) throw ValidationError("duplicate attribute '" + attributes_[a] + "'");
        }
        for (std::size_t k = 0; k < values_.size(); ++k) {
            double v = values_[k];
            if (!std::isfinite(v) || v < scale_.min || v > scale_.max) {
                throw ValidationError("rating " + format_real(v) + " for (" + image_ids_[k / attributes_.size()] + ", " +
                                      attributes_[k % attributes_.size()] + ") outside scale [" + format_real(scale_.min) +
                                      ", " + format_real(scale_.max) + "]");
            }
        }
    }

    const std::vector<std::string>& image_ids() const noexcept { return image_ids_; }
    const std::vector<std::string>& attributes() const noexcept { return attributes_; }
    const RatingScale& scale() const noexcept { return scale_; }
    std::size_t image_count() const noexcept { return image_ids_.size(); }

    double value(std::size_t image, std::size_t attribute) const { return values_[image * attributes_.size() + attribute]; }

    std::optional<std::size_t> find_image(const std::string& id) const {
        auto it = image_index_.find(id);
        return it == image_index_.end() ? std::nullopt : std::optional(it->second);
    }
    std::optional<std::size_t> find_attribute(const std::string& name) const {
        auto it = attribute_index_.find(name);
        return it == attribute_index_.end() ? std::nullopt : std::optional(it->second);
    }

    std::vector<double> column(const std::string& attribute) const {
        auto a = find_attribute(attribute);
        if (!a) throw ValidationError("ratings have no attribute '" + attribute + "'");
        std::vector<double> col(image_ids_.size());
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = value(i, *a);
        return col;
    }

    RatingsTable select(const std::vector<std::string>& ids) const {
        std::vector<double> values;
        values.reserve(ids.size() * attributes_.size());
        for (const auto& id : ids) {
            auto i = find_image(id);
            if (!i) throw ValidationError("ratings have no image '" + id + "'");
            for (std::size_t a = 0; a < attributes_.size(); ++a) values.push_back(value(*i, a));
        }
        return RatingsTable(ids, attributes_, std::move(values), scale_);
    }

    friend bool operator==(const RatingsTable& a, const RatingsTable& b) {
        return a.image_ids_ == b.image_ids_ && a.attributes_ == b.attributes_ && a.values_ == b.values_ && a.scale_ == b.scale_;
    }

private:
    std::vector<std::string> image_ids_;
    std::vector<std::string> attributes_;
    std::vector<double> values_;
    RatingScale scale_;
    std::unordered_map<std::string, std::size_t> image_index_;
    std::unordered_map<std::string, std::size_t> attribute_index_;
};

/// Long-format CSV `image_id,attribute,mean_rating` → dense table. Images and
/// attributes keep first-appearance order.
inline RatingsTable read_ratings(const std::filesystem::path& path, const RatingScale& scale) {
    scale.validate();
    auto table = csv::read(path, {"image_id", "attribute", "mean_rating"});

    std::vector<std::string> images, attributes;
    std::unordered_map<std::string, std::size_t> image_index, attribute_index;
    std::map<std::pair<std::size_t, std::size_t>, double> cells;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::string where = path.string() + ":" + std::to_string(table.line_numbers[r]);
        if (row[0].empty() || row[1].empty()) throw ValidationError(where + ": empty image_id or attribute");
        auto [ii, new_image] = image_index.try_emplace(row[0], images.size());
        if (new_image) images.push_back(row[0]);
        auto [ai, new_attr] = attribute_index.try_emplace(row[1], attributes.size());
        if (new_attr) attributes.push_back(row[1]);
        double v = parse_real(row[2], where);
        if (!std::isfinite(v)) throw ValidationError(where + ": non-finite rating");
        if (v < scale.min || v > scale.max) {
            throw ValidationError(where + ": rating " + row[2] + " outside scale [" + format_real(scale.min) + ", " +
                                  format_real(scale.max) + "]");
        }
        if (!cells.emplace(std::pair{ii->second, ai->second}, v).second) {
            throw ValidationError(where + ": duplicate rating for (" + row[0] + ", " + row[1] + ")");
        }
    }
    if (images.empty()) throw ValidationError(path.string() + ": no ratings");

    std::vector<double> values(images.size() * attributes.size());
    std::vector<std::string> gaps;
    std::size_t gap_count = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        for (std::size_t a = 0; a < attributes.size(); ++a) {
            auto it = cells.find({i, a});
            if (it == cells.end()) {
                if (gaps.size() < 20) gaps.push_back("(" + images[i] + ", " + attributes[a] + ")");
                ++gap_count;
            } else {
                values[i * attributes.size() + a] = it->second;
            }
        }
    }
    if (gap_count > 0) {
        std::string msg = path.string() + ": " + std::to_string(gap_count) + " missing rating(s):";
        for (const auto& g : gaps) msg += " " + g;
        if (gap_count > gaps.size()) msg += " ...";
        throw ValidationError(msg);
    }
    return RatingsTable(std::move(images), std::move(attributes), std::move(values), scale);
}

// ---------------------------------------------------------------------------
// IRR, attribute prompts, model metadata
// ---------------------------------------------------------------------------

class IrrTable {
public:
    IrrTable() = default;
    explicit IrrTable(std::vector<std::pair<std::string, double>> entries) {
        for (auto& [name, irr] : entries) {
            if (!std::isfinite(irr)) throw ValidationError("non-finite IRR for '" + name + "'");
            if (!values_.emplace(name, irr).second) throw ValidationError("duplicate IRR attribute '" + name + "'");
            order_.push_back(name);
        }
    }

    std::optional<double> find(const std::string& attribute) const {
        auto it = values_.find(attribute);
        return it == values_.end() ? std::nullopt : std::optional(it->second);
    }
    double at(const std::string& attribute) const {
        auto v = find(attribute);
        if (!v) throw ValidationError("IRR table has no attribute '" + attribute + "'");
        return *v;
    }
    const std::vector<std::string>& attributes() const noexcept { return order_; }

    void require(const std::vector<std::string>& attributes) const {
        std::string missing;
        for (const auto& a : attributes) {
            if (!values_.count(a)) missing += (missing.empty() ? "" : ", ") + a;
        }
        if (!missing.empty()) throw ValidationError("IRR table lacks audited attribute(s): " + missing);
    }

private:
    std::map<std::string, double> values_;
    std::vector<std::string> order_;
};

inline IrrTable read_irr(const std::filesystem::path& path) {
    auto table = csv::read(path, {"attribute", "irr"});
    std::vector<std::pair<std::string, double>> entries;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::string where = path.string() + ":" + std::to_string(table.line_numbers[r]);
        entries.emplace_back(table.rows[r][0], parse_real(table.rows[r][1], where));
    }
    return IrrTable(std::move(entries));
}

struct AttributeSpec {
    std::string name;
    std::string positive_prompt;
    std::string negative_prompt;

    std::string positive_key() const { return name + "/pos"; }
    std::string negative_key() const { return name + "/neg"; }
    friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

inline void validate_attributes(const std::vector<AttributeSpec>& specs) {
    if (specs.empty()) throw ValidationError("attribute config is empty");
    std::set<std::string> names;
    for (const auto& s : specs) {
        if (s.name.empty()) throw ValidationError("attribute with empty name");
        if (s.positive_prompt.empty() || s.negative_prompt.empty()) throw ValidationError("attribute '" + s.name + "' has an empty prompt");
        if (!names.insert(s.name).second) throw ValidationError("duplicate attribute name '" + s.name + "'");
    }
}

inline std::vector<AttributeSpec> parse_attribute_config(const nlohmann::json& j) {
    if (!j.is_array()) throw FormatError("attribute config must be a JSON array");
    std::vector<AttributeSpec> specs;
    for (const auto& item : j) {
        if (!item.is_object()) throw FormatError("attribute config entries must be objects");
        auto field = [&](const char* key) {
            auto it = item.find(key);
            if (it == item.end() || !it->is_string()) throw FormatError(std::string("attribute entry lacks string '") + key + "'");
            return it->get<std::string>();
        };
        specs.push_back({field("name"), field("positive_prompt"), field("negative_prompt")});
    }
    validate_attributes(specs);
    return specs;
}

inline nlohmann::json attribute_config_to_json(const std::vector<AttributeSpec>& specs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : specs) {
        j.push_back({{"name", s.name}, {"positive_prompt", s.positive_prompt}, {"negative_prompt", s.negative_prompt}});
    }
    return j;
}

inline std::vector<AttributeSpec> read_attribute_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError(path.string() + ": invalid JSON");
    return parse_attribute_config(j);
}

/// The 34 One Million Impressions attributes with their pole prompts. Names
/// follow the OMI column naming (lower case); attributes without a natural
/// opposite use the neutral "a photo of someone" as the negative pole.
inline const std::vector<AttributeSpec>& default_attributes() {
    static const std::vector<AttributeSpec> specs = [] {
        const char* base = "a photo of someone";
        auto is = [](const char* trait) { return std::string("a photo of someone who is ") + trait; };
        auto has = [](const char* trait) { return std::string("a photo of someone who has ") + trait; };
        std::vector<AttributeSpec> v = {
            {"trustworthy", is("trustworthy"), is("devious")},
            {"attractive", is("attractive"), is("ugly")},
            {"dominant", is("dominant"), is("subordinate")},
            {"smart", is("smart"), is("dumb")},
            {"age", is("older"), is("young")},
            {"gender", is("male"), is("female")},
            {"weight", is("overweight"), is("skinny")},
            {"typical", is("typical"), is("unusual")},
            {"happy", is("happy"), is("sad")},
            {"familiar", is("familiar"), is("strange")},
            {"outgoing", is("outgoing"), is("shy")},
            {"memorable", is("memorable"), is("forgettable")},
            {"well-groomed", is("well-groomed"), is("unkempt")},
            {"long-haired", has("long hair"), base},
            {"smug", is("smug"), is("humble")},
            {"dorky", is("dorky"), base},
            {"skin-color", has("dark skin color"), has("light skin color")},
            {"hair-color", has("dark hair color"), has("light hair color")},
            {"alert", is("alert"), base},
            {"cute", is("cute"), base},
            {"privileged", is("privileged"), is("disadvantaged")},
            {"liberal", is("liberal"), is("conservative")},
            {"asian", is("asian"), base},
            {"middle-eastern", is("middle eastern"), base},
            {"hispanic", is("hispanic"), base},
            {"islander", is("a pacific islander"), base},
            {"native", is("a native american"), base},
            {"black", is("black"), base},
            {"white", is("white"), base},
            {"looks-like-you", "a photo of someone who looks like me", "a photo of someone who looks like other people"},
            {"gay", is("gay"), is("straight")},
            {"electable", is("electable"), base},
            {"godly", is("godly"), is("sinful")},
            {"outdoors", is("outdoors"), is("inside")},
        };
        return v;
    }();
    return specs;
}

enum class ModelFamily { openai, faceclip, scaling, other };

inline std::string_view to_string(ModelFamily f) {
    switch (f) {
    case ModelFamily::openai: return "openai";
    case ModelFamily::faceclip: return "faceclip";
    case ModelFamily::scaling: return "scaling";
    case ModelFamily::other: return "other";
    }
    return "other";
}

inline ModelFamily parse_family(std::string_view s) {
    if (s == "openai") return ModelFamily::openai;
    if (s == "faceclip") return ModelFamily::faceclip;
    if (s == "scaling") return ModelFamily::scaling;
    if (s == "other") return ModelFamily::other;
    throw ValidationError("unknown model family '" + std::string(s) + "'");
}

struct ModelMeta {
    std::string model_id;
    ModelFamily family = ModelFamily::other;
    double dataset_size = 0;
    double total_training_samples = 0;
    double image_params = 0;
    double text_params = 0;
};

inline std::vector<ModelMeta> read_model_meta(const std::filesystem::path& path) {
    auto table = csv::read(path, {"model_id", "family", "dataset_size", "total_training_samples", "image_params", "text_params"});
    std::vector<ModelMeta> models;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::string where = path.string() + ":" + std::to_string(table.line_numbers[r]);
        auto count = [&](std::size_t col) {
            double v = parse_real(row[col], where);
            if (!std::isfinite(v) || v < 0) throw ValidationError(where + ": " + table.header[col] + " must be a non-negative count");
            return v;
        };
        if (row[0].empty()) throw ValidationError(where + ": empty model_id");
        if (!seen.insert(row[0]).second) throw ValidationError(where + ": duplicate model_id '" + row[0] + "'");
        models.push_back({row[0], parse_family(row[1]), count(2), count(3), count(4), count(5)});
    }
    return models;
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

/// Embeddings and ratings restricted to their shared ids, both in
/// lexicographic id order.
struct AlignedCorpus {
    EmbeddingMatrix embeddings;
    RatingsTable ratings;
    std::vector<std::string> dropped_embedding_ids;
    std::vector<std::string> dropped_rating_ids;

    const std::vector<std::string>& ids() const noexcept { return embeddings.ids(); }
    std::size_t size() const noexcept { return embeddings.count(); }
};

inline AlignedCorpus align(const EmbeddingMatrix& embeddings, const RatingsTable& ratings) {
    std::vector<std::string> shared, dropped_e, dropped_r;
    for (const auto& id : embeddings.ids()) {
        if (ratings.find_image(id)) shared.push_back(id);
        else dropped_e.push_back(id);
    }
    for (const auto& id : ratings.image_ids()) {
        if (!embeddings.find(id)) dropped_r.push_back(id);
    }
    if (shared.empty()) throw AlignmentError("embeddings and ratings share no image ids");
    std::sort(shared.begin(), shared.end());
    std::sort(dropped_e.begin(), dropped_e.end());
    std::sort(dropped_r.begin(), dropped_r.end());
    return {embeddings.select(shared), ratings.select(shared), std::move(dropped_e), std::move(dropped_r)};
}

inline AlignedCorpus align(const AlignedCorpus& corpus) { return align(corpus.embeddings, corpus.ratings); }

} // namespace faceaudit
