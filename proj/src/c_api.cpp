#include <cstring>
#include <memory>
#include <string>

#include "typojack.h"
#include "typojack/campaign.hpp"

using typojack::Errc;
using typojack::Error;

namespace {

thread_local std::string g_global_error;

tj_status status_for(Errc code) {
  switch (code) {
    case Errc::config_error:
    case Errc::provider_unhealthy:
      return TJ_ERROR_CONFIG;
    case Errc::io_error:
      return TJ_ERROR_IO;
    case Errc::decode_error:
      return TJ_ERROR_DECODE;
    case Errc::transport:
    case Errc::rate_limited:
    case Errc::malformed_response:
    case Errc::remote_unavailable:
    case Errc::provider_failure:
    case Errc::victim_failure:
    case Errc::scorer_failure:
    case Errc::empty_reply:
    case Errc::parse_failure:
    case Errc::malformed_strategy:
      return TJ_ERROR_PROVIDER;
    case Errc::unrenderable:
      return TJ_ERROR_UNRENDERABLE;
    default:
      return TJ_ERROR_INVALID_ARGUMENT;
  }
}

}  // namespace

struct tj_session {
  typojack::campaign::CampaignConfig config;
  std::shared_ptr<const typojack::typography::FontFace> font;  // lazy
  std::string last_error;

  const typojack::typography::FontFace& font_face() {
    if (!font) font = typojack::typography::FontFace::load(config.font_path);
    return *font;
  }
};

struct tj_image {
  typojack::imaging::Rgba8Image image;
};

namespace {

template <typename Fn>
tj_status guarded(tj_session* session, Fn&& fn) {
  std::string* sink = session ? &session->last_error : &g_global_error;
  try {
    return fn();
  } catch (const Error& e) {
    *sink = std::string(typojack::errc_name(e.code())) + ": " + e.what();
    return status_for(e.code());
  } catch (const std::exception& e) {
    *sink = e.what();
    return TJ_ERROR_INTERNAL;
  } catch (...) {
    *sink = "unknown error";
    return TJ_ERROR_INTERNAL;
  }
}

tj_status require(bool ok, tj_session* session, const char* message) {
  if (ok) return TJ_OK;
  (session ? session->last_error : g_global_error) = message;
  return TJ_ERROR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* tj_version(void) { return "0.1.0"; }

const char* tj_global_last_error(void) { return g_global_error.c_str(); }

tj_status tj_session_open(const char* config_path, tj_session** out_session) {
  if (tj_status s = require(config_path && out_session, nullptr,
                            "config_path and out_session must be non-null");
      s != TJ_OK) {
    return s;
  }
  *out_session = nullptr;
  return guarded(nullptr, [&] {
    auto session = std::make_unique<tj_session>();
    session->config = typojack::campaign::load_config(config_path);
    *out_session = session.release();
    return TJ_OK;
  });
}

void tj_session_close(tj_session* session) { delete session; }

const char* tj_session_last_error(const tj_session* session) {
  return session ? session->last_error.c_str() : g_global_error.c_str();
}

tj_status tj_session_override_seed(tj_session* session, uint64_t seed) {
  if (tj_status s = require(session != nullptr, nullptr, "null session"); s != TJ_OK) return s;
  session->config.master_seed = seed;
  return TJ_OK;
}

tj_status tj_session_override_mode(tj_session* session, const char* mode) {
  if (tj_status s = require(session && mode, session, "null session or mode"); s != TJ_OK) return s;
  std::string m(mode);
  if (m == "image_only") {
    session->config.mode = typojack::harness::Mode::image_only;
  } else if (m == "image_plus_text") {
    session->config.mode = typojack::harness::Mode::image_plus_text;
  } else {
    session->last_error = "mode must be image_only or image_plus_text";
    return TJ_ERROR_CONFIG;
  }
  return TJ_OK;
}

tj_status tj_session_override_defense(tj_session* session, int enabled) {
  if (tj_status s = require(session != nullptr, nullptr, "null session"); s != TJ_OK) return s;
  if (enabled && session->config.detector.kind == "none") {
    session->last_error = "config field 'providers.detector': required when defense is enabled";
    return TJ_ERROR_CONFIG;
  }
  session->config.defense_enabled = enabled != 0;
  return TJ_OK;
}

tj_status tj_session_override_output_dir(tj_session* session, const char* dir) {
  if (tj_status s = require(session && dir && *dir, session, "output dir must be non-empty");
      s != TJ_OK) {
    return s;
  }
  session->config.output_dir = dir;
  return TJ_OK;
}

tj_status tj_run_optimize(tj_session* session, const char* image_path,
                          const char* prompt_text) {
  if (tj_status s = require(session && image_path && prompt_text, session,
                            "session, image_path and prompt_text must be non-null");
      s != TJ_OK) {
    return s;
  }
  return guarded(session, [&] {
    typojack::placement::Result result = typojack::campaign::run_optimize(
        session->config, image_path, prompt_text);
    return result.partial ? TJ_ERROR_PARTIAL : TJ_OK;
  });
}

tj_status tj_run_attack(tj_session* session, const char* goal_id) {
  if (tj_status s = require(session && goal_id, session, "session and goal_id must be non-null");
      s != TJ_OK) {
    return s;
  }
  return guarded(session, [&] {
    typojack::campaign::TaskResult result =
        typojack::campaign::run_attack(session->config, goal_id);
    return result.outcome.valid ? TJ_OK : TJ_ERROR_PARTIAL;
  });
}

tj_status tj_run_campaign(tj_session* session) {
  if (tj_status s = require(session != nullptr, nullptr, "null session"); s != TJ_OK) return s;
  return guarded(session, [&] {
    typojack::campaign::CampaignResult result =
        typojack::campaign::run_campaign(session->config);
    return result.exit_code == 2 ? TJ_ERROR_PARTIAL : TJ_OK;
  });
}

tj_status tj_run_defend(tj_session* session, const char* image_dir) {
  if (tj_status s = require(session && image_dir, session, "session and image_dir must be non-null");
      s != TJ_OK) {
    return s;
  }
  return guarded(session, [&] {
    typojack::campaign::run_defend(session->config, image_dir);
    return TJ_OK;
  });
}

tj_status tj_run_report(tj_session* session, const char* campaign_dir) {
  if (tj_status s = require(session && campaign_dir, session,
                            "session and campaign_dir must be non-null");
      s != TJ_OK) {
    return s;
  }
  return guarded(session, [&] {
    typojack::campaign::run_report(session->config, campaign_dir);
    return TJ_OK;
  });
}

tj_status tj_image_load(const char* path, tj_image** out_image) {
  if (tj_status s = require(path && out_image, nullptr, "path and out_image must be non-null");
      s != TJ_OK) {
    return s;
  }
  *out_image = nullptr;
  return guarded(nullptr, [&] {
    auto img = std::make_unique<tj_image>();
    img->image = typojack::imaging::load_png(path);
    *out_image = img.release();
    return TJ_OK;
  });
}

tj_status tj_image_create(uint32_t width, uint32_t height,
                          const uint8_t* rgba_or_null, tj_image** out_image) {
  if (tj_status s = require(out_image != nullptr, nullptr, "out_image must be non-null");
      s != TJ_OK) {
    return s;
  }
  *out_image = nullptr;
  return guarded(nullptr, [&] {
    auto img = std::make_unique<tj_image>();
    img->image = typojack::imaging::Rgba8Image(width, height);
    if (rgba_or_null != nullptr) {
      std::memcpy(img->image.pixels.data(), rgba_or_null,
                  img->image.pixels.size());
    } else {
      for (std::size_t i = 3; i < img->image.pixels.size(); i += 4) {
        img->image.pixels[i] = 255;
      }
    }
    *out_image = img.release();
    return TJ_OK;
  });
}

tj_status tj_image_save(const tj_image* image, const char* path) {
  if (tj_status s = require(image && path, nullptr, "image and path must be non-null");
      s != TJ_OK) {
    return s;
  }
  return guarded(nullptr, [&] {
    typojack::imaging::save_png(image->image, path);
    return TJ_OK;
  });
}

tj_status tj_image_size(const tj_image* image, uint32_t* out_width,
                        uint32_t* out_height) {
  if (tj_status s = require(image && out_width && out_height, nullptr,
                            "image and out pointers must be non-null");
      s != TJ_OK) {
    return s;
  }
  *out_width = image->image.width;
  *out_height = image->image.height;
  return TJ_OK;
}

tj_status tj_image_pixels(const tj_image* image, const uint8_t** out_pixels,
                          size_t* out_size) {
  if (tj_status s = require(image && out_pixels && out_size, nullptr,
                            "image and out pointers must be non-null");
      s != TJ_OK) {
    return s;
  }
  *out_pixels = image->image.pixels.data();
  *out_size = image->image.pixels.size();
  return TJ_OK;
}

void tj_image_destroy(tj_image* image) { delete image; }

tj_status tj_session_insert_prompt(tj_session* session, const tj_image* base,
                                   const char* prompt_text,
                                   const tj_typo_params* params,
                                   tj_image** out_altered) {
  if (tj_status s = require(session && base && prompt_text && params && out_altered,
                            session, "all arguments must be non-null");
      s != TJ_OK) {
    return s;
  }
  *out_altered = nullptr;
  return guarded(session, [&] {
    typojack::typography::TypoParams p;
    p.x = params->x;
    p.y = params->y;
    p.font_size = params->font_size;
    p.color = {params->color_r, params->color_g, params->color_b};
    p.line_count = params->line_count;
    p.contrast = params->contrast;
    p.transparency = params->transparency;

    typojack::typography::InsertResult render = typojack::typography::insert_prompt(
        base->image, prompt_text, p, session->font_face());
    auto img = std::make_unique<tj_image>();
    img->image = std::move(render.altered);
    *out_altered = img.release();
    return TJ_OK;
  });
}

tj_status tj_session_perceptual_distance(tj_session* session,
                                         const tj_image* a, const tj_image* b,
                                         double* out_distance) {
  if (tj_status s = require(session && a && b && out_distance, session,
                            "all arguments must be non-null");
      s != TJ_OK) {
    return s;
  }
  return guarded(session, [&] {
    std::unique_ptr<typojack::perceptual::DistanceProvider> provider;
    if (session->config.perceptual.kind == "default") {
      provider = std::make_unique<typojack::perceptual::MultiscaleTileDistance>();
    } else {
      provider = std::make_unique<typojack::perceptual::RemoteLpipsDistance>(
          session->config.perceptual.http.endpoint,
          session->config.perceptual.http.timeout_s);
    }
    *out_distance =
        typojack::perceptual::perceptual_distance(a->image, b->image, *provider);
    return TJ_OK;
  });
}

}  // extern "C"
