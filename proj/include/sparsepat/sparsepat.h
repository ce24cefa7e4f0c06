/* sparsepat C API: sparse-sampling photoacoustic tomography toolkit.
 *
 * All functions return sp_status; sp_last_error() describes the most recent
 * failure on the calling thread. Objects are opaque handles released with
 * their sp_*_free function.
 */
#ifndef SPARSEPAT_SPARSEPAT_H
#define SPARSEPAT_SPARSEPAT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SPARSEPAT_API __declspec(dllexport)
#else
#define SPARSEPAT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sp_status {
  SP_OK = 0,
  SP_ERR_INVALID_ARGUMENT = 1,
  SP_ERR_IO = 2,
  SP_ERR_NUMERIC = 3,
  SP_ERR_INTERNAL = 4
} sp_status;

SPARSEPAT_API const char *sp_last_error(void);
SPARSEPAT_API const char *sp_version(void);

typedef struct sp_image sp_image;
typedef struct sp_sensor_data sp_sensor_data;
typedef struct sp_model sp_model;

/* ---- simulation configuration ------------------------------------------ */

typedef struct sp_sim_params {
  double sound_speed;   /* m/s */
  double dx;            /* meters per pixel */
  double dt;            /* seconds; <= 0 selects the CFL 0.3 default */
  int n_steps;          /* <= 0 selects two diagonal crossings */
  int pml_width;        /* grid points, >= 8 */
  double pml_alpha;     /* nepers */
  int smooth_p0;        /* nonzero: Blackman-smooth the source */
  double sensor_radius; /* pixels; <= 0 selects grid * 30/64 */
  int detectors;
} sp_sim_params;

/* Fills defaults for a grid and detector count. */
SPARSEPAT_API sp_status sp_sim_params_init(int grid, int detectors, sp_sim_params *out);

/* ceil(pi * d): minimum detectors for artifact-free sampling of a d x d image. */
SPARSEPAT_API int sp_required_detectors(int image_side);

/* ---- images and phantoms ------------------------------------------------ */

/* kind: circles | shepp_logan | vessels | vessels_complex */
SPARSEPAT_API sp_status sp_phantom(const char *kind, int size, uint64_t seed, sp_image **out);
SPARSEPAT_API sp_status sp_image_load(const char *ptns_path, sp_image **out);
SPARSEPAT_API sp_status sp_image_save(const sp_image *img, const char *ptns_path);
SPARSEPAT_API sp_status sp_image_save_pgm(const sp_image *img, const char *pgm_path);
SPARSEPAT_API int sp_image_size(const sp_image *img);
SPARSEPAT_API sp_status sp_image_pixels(const sp_image *img, float *buf, size_t buf_len);
SPARSEPAT_API void sp_image_free(sp_image *img);

/* ---- forward simulation and time reversal ------------------------------ */

SPARSEPAT_API sp_status sp_simulate(const sp_image *p0, const sp_sim_params *params,
                                    sp_sensor_data **out);
/* Writes the trace matrix as PTNS plus a JSON sidecar (<path>.json) carrying
 * dt, dx, sound speed, grid, PML, and detector positions. */
SPARSEPAT_API sp_status sp_sensor_data_save(const sp_sensor_data *data, const char *ptns_path);
SPARSEPAT_API sp_status sp_sensor_data_load(const char *ptns_path, sp_sensor_data **out);
SPARSEPAT_API sp_status sp_sensor_data_shape(const sp_sensor_data *data, int *n_detectors,
                                             int *n_steps);
SPARSEPAT_API sp_status sp_time_reverse(const sp_sensor_data *data, sp_image **out);
SPARSEPAT_API void sp_sensor_data_free(sp_sensor_data *data);

/* ---- models -------------------------------------------------------------- */

/* arch: unet | fd_unet. k1 is ignored for unet. */
SPARSEPAT_API sp_status sp_model_build(const char *arch, int f1, int k1, uint64_t seed,
                                       sp_model **out);
SPARSEPAT_API sp_status sp_model_load(const char *dir, sp_model **out);
SPARSEPAT_API sp_status sp_model_save(const sp_model *model, const char *dir);
SPARSEPAT_API int64_t sp_model_param_count(const sp_model *model);
SPARSEPAT_API sp_status sp_model_apply(const sp_model *model, const sp_image *x, sp_image **out);
SPARSEPAT_API void sp_model_free(sp_model *model);

/* ---- datasets, training, evaluation ------------------------------------- */

typedef struct sp_train_params {
  int iterations;       /* default 10000 */
  double learning_rate; /* default 1e-4 */
  int batch_size;       /* default 3 */
  uint64_t seed;
} sp_train_params;

SPARSEPAT_API void sp_train_params_init(sp_train_params *out);

/* Writes x_*.ptns / y_*.ptns / manifest.json into out_dir. The first
 * train_count samples are labeled "train", the rest "test". */
SPARSEPAT_API sp_status sp_make_dataset(const char *kind, int n, int train_count, int detectors,
                                        int grid, uint64_t seed, int jobs, const char *out_dir);

/* Trains in place on the manifest's train split; writes weights and
 * loss.csv under out_dir when out_dir is non-NULL. Fine-tuning is the same
 * call on a loaded model (the optimizer state always starts fresh). */
SPARSEPAT_API sp_status sp_train(sp_model *model, const char *manifest_path,
                                 const sp_train_params *params, const char *out_dir);

/* model may be NULL for the time-reversal baseline row. Appends one CSV row
 * (with header when the file is new) and optionally returns the means. */
SPARSEPAT_API sp_status sp_evaluate(const sp_model *model, const char *manifest_path,
                                    const char *split, const char *method_label,
                                    const char *csv_path, double *psnr_mean_out,
                                    double *ssim_mean_out);

/* Ground truth | TR | one column per model, for the first n_panels test
 * samples, plus a CSV table covering TR and every model. */
SPARSEPAT_API sp_status sp_report(const char *manifest_path, const char *const *model_dirs,
                                  int n_models, int n_panels, const char *out_dir);

/* name: exp1_circles | exp2_transfer | exp3_vessels; scale: desk | full. */
SPARSEPAT_API sp_status sp_experiment(const char *name, const char *scale, uint64_t seed,
                                      int jobs, const char *out_dir);

/* fold_of_sample[i] in [0, k): index of the fold whose test set holds i. */
SPARSEPAT_API sp_status sp_cv_folds(int n_total, int k, int *fold_of_sample);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SPARSEPAT_SPARSEPAT_H */
