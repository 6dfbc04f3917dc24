#include <sace/sace.h>

#include <cstring>
#include <new>
#include <string>

#include "data_model.hpp"
#include "report.hpp"

struct sace_dataset {
  sace::CrtDataset data;
};

namespace {

thread_local std::string tl_last_error;

void set_error(const std::string& msg) { tl_last_error = msg; }

char* copy_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int status_of(const sace::Error& e) {
  set_error(e.what());
  return static_cast<int>(e.category());
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const sace::Error& e) {
    return status_of(e);
  } catch (const std::exception& e) {
    set_error(e.what());
    return SACE_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown internal error");
    return SACE_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* sace_version(void) { return SACE_VERSION_STRING; }

const char* sace_last_error(void) { return tl_last_error.c_str(); }

void sace_clear_last_error(void) { tl_last_error.clear(); }

int sace_dataset_read_csv(const char* path, sace_dataset** out) {
  if (!path || !out) {
    set_error("null pointer argument");
    return SACE_ERR_NULLPTR;
  }
  return guarded([&] {
    auto* handle = new sace_dataset{sace::read_csv(path)};
    *out = handle;
    return SACE_OK;
  });
}

int sace_dataset_parse_csv(const char* csv_text, sace_dataset** out) {
  if (!csv_text || !out) {
    set_error("null pointer argument");
    return SACE_ERR_NULLPTR;
  }
  return guarded([&] {
    auto* handle = new sace_dataset{sace::parse_csv_text(csv_text)};
    *out = handle;
    return SACE_OK;
  });
}

void sace_dataset_free(sace_dataset* dataset) { delete dataset; }

int sace_dataset_counts(const sace_dataset* dataset, int32_t* n_clusters,
                        int32_t* n_individuals) {
  if (!dataset) {
    set_error("null pointer argument");
    return SACE_ERR_NULLPTR;
  }
  if (n_clusters) *n_clusters = static_cast<int32_t>(dataset->data.n_clusters());
  if (n_individuals) *n_individuals = static_cast<int32_t>(dataset->data.n_individuals());
  return SACE_OK;
}

int sace_validate(const sace_dataset* dataset, char** json_out) {
  if (!dataset || !json_out) {
    set_error("null pointer argument");
    return SACE_ERR_NULLPTR;
  }
  return guarded([&] {
    *json_out = copy_string(sace::validation_report_json(dataset->data));
    return *json_out ? SACE_OK : SACE_ERR_INTERNAL;
  });
}

int sace_estimate(const sace_dataset* dataset, const char* options_json, char** json_out) {
  if (!dataset || !json_out) {
    set_error("null pointer argument");
    return SACE_ERR_NULLPTR;
  }
  return guarded([&] {
    const sace::EstimateRequest req =
        sace::parse_estimate_request(options_json ? options_json : "");
    *json_out = copy_string(sace::run_estimate_report(dataset->data, req));
    return *json_out ? SACE_OK : SACE_ERR_INTERNAL;
  });
}

int sace_simulate(const char* request_json, char** csv_out, char** manifest_json_out) {
  if (!request_json || !csv_out) {
    set_error("null pointer argument");
    return SACE_ERR_NULLPTR;
  }
  return guarded([&] {
    const sace::SimulateRequest req = sace::parse_simulate_request(request_json);
    std::string manifest;
    const std::string csv = sace::run_simulate_csv(req, &manifest);
    *csv_out = copy_string(csv);
    if (!*csv_out) return SACE_ERR_INTERNAL;
    if (manifest_json_out) {
      *manifest_json_out = copy_string(manifest);
      if (!*manifest_json_out) {
        sace_string_free(*csv_out);
        *csv_out = nullptr;
        return SACE_ERR_INTERNAL;
      }
    }
    return SACE_OK;
  });
}

void sace_string_free(char* s) { delete[] s; }

}  // extern "C"
