#pragma once

// Chat-completion and embedding clients (OpenAI-compatible wire format) plus offline mocks.

#include "rsrag/embedding.hpp"
#include "rsrag/error.hpp"
#include "rsrag/prompt.hpp"
#include "rsrag/text_util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace rsrag {

struct ImagePayload {
    std::string media_type;  // image/png, image/jpeg or image/webp
    std::string base64;

    std::string data_url() const { return "data:" + media_type + ";base64," + base64; }
};

inline bool is_supported_media_type(std::string_view mt) {
    return mt == "image/png" || mt == "image/jpeg" || mt == "image/webp";
}

/// Media type from magic bytes.
inline std::string sniff_media_type(std::string_view bytes) {
    if (bytes.size() >= 8 && bytes.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8)) return "image/png";
    if (bytes.size() >= 3 && bytes.substr(0, 3) == std::string_view("\xff\xd8\xff", 3)) return "image/jpeg";
    if (bytes.size() >= 12 && bytes.substr(0, 4) == "RIFF" && bytes.substr(8, 4) == "WEBP") return "image/webp";
    throw Error(ErrorKind::kUnsupportedMediaType, "unrecognized image bytes");
}

inline ImagePayload make_image_payload(std::string_view bytes, std::string media_type = {}) {
    if (media_type.empty()) media_type = sniff_media_type(bytes);
    if (!is_supported_media_type(media_type)) throw Error(ErrorKind::kUnsupportedMediaType, media_type);
    return ImagePayload{std::move(media_type), httplib::detail::base64_encode(std::string(bytes))};
}

inline ImagePayload load_image_payload(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return make_image_payload(bytes);
}

struct DecodeParams {
    int num_beams = 3;
    int max_new_tokens = 64;
    bool deterministic = true;
};

struct GenerationRequest {
    std::string prompt;
    std::optional<ImagePayload> image;
    DecodeParams decode;
    std::string model_name;
    std::string target_language;
};

struct GenerationResult {
    std::string text;
    double latency_ms = 0.0;
    std::string backend_id;
    std::string raw_response;
    int attempts = 1;
    /// False when the backend has no beam parameter and the width was dropped.
    bool beam_param_sent = false;
};

/// Trims, keeps the first line, strips one pair of surrounding quotes.
inline std::string postprocess_caption(std::string_view raw) {
    std::string s(trim(raw));
    if (auto nl = s.find('\n'); nl != std::string::npos) s = trim(s.substr(0, nl));
    auto strip_pair = [&](std::string_view open, std::string_view close) {
        if (s.size() >= open.size() + close.size() && starts_with(s, open) &&
            s.compare(s.size() - close.size(), close.size(), close) == 0) {
            s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
            return true;
        }
        return false;
    };
    strip_pair("\"", "\"") || strip_pair("'", "'") || strip_pair("“", "”");
    return s;
}

namespace detail {

inline void check_request(const GenerationRequest& req, bool multimodal) {
    if (req.prompt.empty()) throw Error(ErrorKind::kInvalidArgument, "empty prompt");
    if (req.decode.num_beams < 1) throw Error(ErrorKind::kInvalidArgument, "num_beams must be >= 1");
    if (multimodal) {
        if (!req.image) throw Error(ErrorKind::kInvalidArgument, "multimodal request without image");
        if (!is_supported_media_type(req.image->media_type)) {
            throw Error(ErrorKind::kUnsupportedMediaType, req.image->media_type);
        }
    } else if (req.image) {
        throw Error(ErrorKind::kInvalidArgument, "text-only request carries an image");
    }
}

} // namespace detail

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string id() const = 0;

    GenerationResult complete(const GenerationRequest& req) {
        detail::check_request(req, false);
        return generate(req);
    }
    GenerationResult complete_multimodal(const GenerationRequest& req) {
        detail::check_request(req, true);
        return generate(req);
    }
    /// Dispatches on the presence of an image.
    GenerationResult run(const GenerationRequest& req) { return req.image ? complete_multimodal(req) : complete(req); }

protected:
    virtual GenerationResult generate(const GenerationRequest& req) = 0;
};

/// Returns the first input caption of a captioning prompt, or the English source of a
/// translation prompt; any other prompt yields its first line. Ignores images.
class EchoFirstCaptionBackend final : public ChatBackend {
public:
    std::string id() const override { return "echo-first-caption"; }

protected:
    GenerationResult generate(const GenerationRequest& req) override {
        const std::string& p = req.prompt;
        std::string picked;
        std::size_t from = p.find(prompt_text::kInputSection);
        if (from == std::string::npos) from = 0;
        if (auto pos = p.find("CAPTION 1: ", from); pos != std::string::npos) {
            picked = p.substr(pos + 11, p.find('\n', pos) - (pos + 11));
        } else if (auto en = p.find("\nEnglish: "); en != std::string::npos) {
            const std::size_t start = en + 10;
            const std::size_t stop = p.rfind('\n');
            picked = p.substr(start, stop > start ? stop - start : std::string::npos);
        } else {
            picked = p.substr(0, p.find('\n'));
        }
        GenerationResult out;
        out.raw_response = picked;
        out.text = postprocess_caption(picked);
        if (out.text.empty()) throw Error(ErrorKind::kEmptyCompletion, "mock produced no text");
        out.backend_id = id();
        return out;
    }
};

// ---------------------------------------------------------------------------
// HTTP transport

struct HttpRequest {
    std::string path;
    std::string body;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Throws Error(kTransport) when no response was obtained.
using Transport = std::function<HttpResponse(const HttpRequest&)>;

struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string chat_path = "/v1/chat/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::string model;
    /// Environment variable holding a bearer token; empty or unset means no auth header.
    std::string api_key_env;
    double timeout_s = 120.0;
    int max_in_flight = 4;
    int max_attempts = 3;
    int initial_backoff_ms = 200;
    /// Whether the server accepts a beam-width field.
    bool send_num_beams = true;
};

inline Transport httplib_transport(const EndpointConfig& cfg) {
    std::string token;
    if (!cfg.api_key_env.empty()) {
        if (const char* v = std::getenv(cfg.api_key_env.c_str())) token = v;
    }
    return [base = cfg.base_url, timeout = cfg.timeout_s, token](const HttpRequest& req) {
        httplib::Client client(base);
        const auto secs = static_cast<time_t>(timeout);
        const auto usecs = static_cast<time_t>((timeout - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
        auto res = client.Post(req.path, headers, req.body, "application/json");
        if (!res) throw Error(ErrorKind::kTransport, base + req.path + ": " + httplib::to_string(res.error()));
        return HttpResponse{res->status, res->body};
    };
}

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

namespace detail {

/// Bounded in-flight requests, exponential backoff on transport failures only.
class HttpCaller {
public:
    HttpCaller(EndpointConfig cfg, Transport transport, Sleeper sleeper)
        : cfg_(std::move(cfg)), transport_(std::move(transport)), sleeper_(std::move(sleeper)),
          slots_(std::make_shared<std::counting_semaphore<1024>>(std::clamp(cfg_.max_in_flight, 1, 1024))) {
        if (cfg_.max_attempts < 1) throw Error(ErrorKind::kInvalidArgument, "max_attempts must be >= 1");
    }

    const EndpointConfig& config() const noexcept { return cfg_; }

    /// Returns the 2xx body and the number of attempts used.
    std::pair<std::string, int> post(const std::string& path, const std::string& body) {
        slots_->acquire();
        struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
        } release{*slots_};

        auto backoff = std::chrono::milliseconds(cfg_.initial_backoff_ms);
        for (int attempt = 1;; ++attempt) {
            HttpResponse res;
            try {
                res = transport_(HttpRequest{path, body});
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::kTransport || attempt >= cfg_.max_attempts) throw;
                sleeper_(backoff);
                backoff *= 2;
                continue;
            }
            if (res.status < 200 || res.status >= 300) {
                throw Error(ErrorKind::kHttpStatus, std::to_string(res.status) + " from " + path + ": " +
                                                        res.body.substr(0, 200));
            }
            return {std::move(res.body), attempt};
        }
    }

private:
    EndpointConfig cfg_;
    Transport transport_;
    Sleeper sleeper_;
    std::shared_ptr<std::counting_semaphore<1024>> slots_;
};

inline nlohmann::json parse_body(const std::string& body, std::string_view what) {
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kMalformedRecord, std::string(what) + " response: " + e.what());
    }
}

} // namespace detail

/// Single user message; the image, when present, is a second content part (data URL).
inline nlohmann::json chat_request_body(const GenerationRequest& req, const EndpointConfig& cfg) {
    nlohmann::json content;
    if (req.image) {
        content = nlohmann::json::array({{{"type", "text"}, {"text", req.prompt}},
                                         {{"type", "image_url"}, {"image_url", {{"url", req.image->data_url()}}}}});
    } else {
        content = req.prompt;
    }
    nlohmann::json body{{"model", req.model_name.empty() ? cfg.model : req.model_name},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
                        {"max_tokens", req.decode.max_new_tokens}};
    if (req.decode.deterministic) {
        body["temperature"] = 0;
        body["seed"] = 0;
    }
    if (cfg.send_num_beams) {
        body["num_beams"] = req.decode.num_beams;
        body["use_beam_search"] = req.decode.num_beams > 1;
    }
    return body;
}

class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(EndpointConfig cfg, Transport transport = {}, Sleeper sleeper = real_sleeper())
        : caller_(cfg, transport ? std::move(transport) : httplib_transport(cfg), std::move(sleeper)) {}

    std::string id() const override { return "http:" + caller_.config().base_url + "#" + caller_.config().model; }

protected:
    GenerationResult generate(const GenerationRequest& req) override {
        const auto t0 = std::chrono::steady_clock::now();
        auto [body, attempts] = caller_.post(caller_.config().chat_path, chat_request_body(req, caller_.config()).dump());
        const nlohmann::json j = detail::parse_body(body, "chat");
        std::string content;
        try {
            const auto& msg = j.at("choices").at(0).at("message").at("content");
            if (msg.is_string()) content = msg.get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::kEmptyCompletion, "response has no choices[0].message.content");
        }
        GenerationResult out;
        out.text = postprocess_caption(content);
        if (out.text.empty()) throw Error(ErrorKind::kEmptyCompletion, "blank completion");
        out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        out.backend_id = id();
        out.raw_response = std::move(body);
        out.attempts = attempts;
        out.beam_param_sent = caller_.config().send_num_beams;
        return out;
    }

private:
    detail::HttpCaller caller_;
};

// ---------------------------------------------------------------------------
// Embeddings

struct EmbedItem {
    std::string text;
    std::optional<ImagePayload> image;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::string id() const = 0;

    std::vector<EmbeddingVector> embed_remote(const std::vector<EmbedItem>& items) {
        if (items.empty()) throw Error(ErrorKind::kInvalidArgument, "empty embedding batch");
        auto out = embed(items);
        if (out.size() != items.size()) {
            throw Error(ErrorKind::kMalformedRecord, "embedding count " + std::to_string(out.size()) + " != " +
                                                         std::to_string(items.size()));
        }
        for (const auto& v : out) {
            if (v.dim() != out.front().dim()) {
                throw Error(ErrorKind::kDimensionInconsistency, "dim " + std::to_string(out.front().dim()) + " then " +
                                                                    std::to_string(v.dim()));
            }
        }
        return out;
    }

protected:
    virtual std::vector<EmbeddingVector> embed(const std::vector<EmbedItem>& items) = 0;
};

/// Seeded hash of the item bytes to a unit vector; identical input gives identical output.
class HashEmbedder final : public EmbeddingBackend {
public:
    explicit HashEmbedder(std::size_t dim = 32, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
        if (dim == 0) throw Error(ErrorKind::kInvalidArgument, "dim must be >= 1");
    }
    std::string id() const override { return "hash-embedder"; }
    std::size_t dim() const noexcept { return dim_; }

    EmbeddingVector embed_bytes(std::string_view bytes) const {
        std::uint64_t h = 1469598103934665603ULL ^ seed_;  // FNV-1a
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        std::vector<float> v(dim_);
        double norm2 = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            h += 0x9e3779b97f4a7c15ULL;  // splitmix64
            std::uint64_t z = h;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            z ^= z >> 31;
            const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
            v[i] = static_cast<float>(2.0 * u - 1.0);
            norm2 += static_cast<double>(v[i]) * v[i];
        }
        if (norm2 == 0.0) v[0] = 1.0f;
        const double n = std::sqrt(norm2 == 0.0 ? 1.0 : norm2);
        for (float& x : v) x = static_cast<float>(x / n);
        return EmbeddingVector(std::move(v));
    }

    EmbeddingVector embed_text(std::string_view text) const { return embed_bytes(text); }

protected:
    std::vector<EmbeddingVector> embed(const std::vector<EmbedItem>& items) override {
        std::vector<EmbeddingVector> out;
        out.reserve(items.size());
        for (const auto& it : items) {
            out.push_back(it.image ? embed_bytes(it.image->base64) : embed_bytes(it.text));
        }
        return out;
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// `{"model", "input": [...]}` -> `data[].embedding`; images are sent as data URLs.
class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(EndpointConfig cfg, Transport transport = {}, Sleeper sleeper = real_sleeper())
        : caller_(cfg, transport ? std::move(transport) : httplib_transport(cfg), std::move(sleeper)) {}

    std::string id() const override { return "http:" + caller_.config().base_url + "#" + caller_.config().model; }

protected:
    std::vector<EmbeddingVector> embed(const std::vector<EmbedItem>& items) override {
        nlohmann::json input = nlohmann::json::array();
        for (const auto& it : items) input.push_back(it.image ? it.image->data_url() : it.text);
        const nlohmann::json req{{"model", caller_.config().model}, {"input", input}};
        auto [body, attempts] = caller_.post(caller_.config().embeddings_path, req.dump());
        (void)attempts;
        const nlohmann::json j = detail::parse_body(body, "embeddings");
        std::vector<EmbeddingVector> out;
        try {
            const auto& data = j.at("data");
            std::vector<const nlohmann::json*> ordered(data.size(), nullptr);
            for (std::size_t i = 0; i < data.size(); ++i) {
                const std::size_t idx = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
                if (idx >= ordered.size() || ordered[idx]) throw Error(ErrorKind::kMalformedRecord, "bad data[].index");
                ordered[idx] = &data[i];
            }
            for (const auto* d : ordered) out.emplace_back(d->at("embedding").get<std::vector<float>>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::kMalformedRecord, std::string("embeddings response: ") + e.what());
        }
        return out;
    }

private:
    detail::HttpCaller caller_;
};

} // namespace rsrag
