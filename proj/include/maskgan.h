/*
 * maskgan: adversarially trained image -> segmentation-mask translation.
 *
 * C interface over the training/evaluation core. All functions return
 * mg_status; on failure mg_last_error() carries a thread-local message.
 * Handles are opaque and owned by the caller via the matching _free call.
 */
#ifndef MASKGAN_H
#define MASKGAN_H

#include <stdint.h>

#if defined(_WIN32)
#define MG_API __declspec(dllexport)
#else
#define MG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mg_status {
    MG_OK = 0,
    MG_ERR_INVALID_ARGUMENT = 1,
    MG_ERR_SHAPE = 2,
    MG_ERR_IO = 3,
    MG_ERR_CORRUPT = 4,
    MG_ERR_VERSION = 5,
    MG_ERR_TASK_MISMATCH = 6,
    MG_ERR_NUMERIC = 7,
    MG_ERR_UNKNOWN = 8
} mg_status;

typedef enum mg_task { MG_TASK_CGAN = 0, MG_TASK_CYCLEGAN = 1 } mg_task;

/* A2B maps images to masks; B2A is the CycleGAN reverse generator. */
typedef enum mg_direction { MG_DIR_A2B = 0, MG_DIR_B2A = 1 } mg_direction;

typedef struct mg_dataset mg_dataset;
typedef struct mg_checkpoint mg_checkpoint;

MG_API const char* mg_version(void);
MG_API const char* mg_status_name(mg_status status);
MG_API const char* mg_last_error(void);

/* ---- datasets ------------------------------------------------------- */

/* Deterministic synthetic shapes dataset (n samples, square image_size). */
MG_API mg_status mg_dataset_synth(int n, int image_size, uint64_t seed, mg_dataset** out);

/* Loads PNG files from <dir>/images and <dir>/masks with matching basenames. */
MG_API mg_status mg_dataset_load(const char* dir, int image_size, mg_dataset** out);

/* Materializes the dataset in the standard directory layout. */
MG_API mg_status mg_dataset_write(const mg_dataset* ds, const char* dir);

/* Seed-deterministic partition into n_train + n_test samples. */
MG_API mg_status mg_dataset_split(const mg_dataset* ds, int n_train, int n_test, uint64_t seed,
                                  mg_dataset** train_out, mg_dataset** test_out);

MG_API int mg_dataset_size(const mg_dataset* ds);
MG_API int mg_dataset_image_size(const mg_dataset* ds);
MG_API int mg_dataset_channels(const mg_dataset* ds);
/* Valid while ds lives; NULL when index is out of range. */
MG_API const char* mg_dataset_sample_name(const mg_dataset* ds, int index);
MG_API void mg_dataset_free(mg_dataset* ds);

/* ---- training ------------------------------------------------------- */

typedef struct mg_train_config {
    mg_task task;
    int epochs;
    int batch_size;
    float learning_rate;
    float adam_beta1;
    float adam_beta2;
    float adam_eps;
    float lambda_l1;     /* CGAN reconstruction weight */
    float lambda_cycle;  /* CycleGAN cycle-consistency weight */
    uint64_t seed;
    int image_size;
    int gen_base;
    int gen_depth;
    int disc_base;
    int disc_layers;
    int checkpoint_every; /* periodic checkpoint interval in epochs; 0 disables */
    int n_train;          /* split bookkeeping, recorded in the checkpoint */
    int n_test;
} mg_train_config;

/* Fills every field with the standard recipe for the task (100 epochs,
 * lr 2e-4, betas 0.5/0.999, lambda_l1 100, lambda_cycle 10, batch 1,
 * image_size 32, gen base 8 depth 3, disc base 8 with 2 stride-2 layers). */
MG_API void mg_train_config_init(mg_train_config* cfg, mg_task task);

typedef struct mg_epoch_record {
    int epoch;
    double g_loss;
    double d_loss;
    double g_adv;
    double g_l1;
    double g_cycle;
    int has_l1;
    int has_cycle;
} mg_epoch_record;

typedef void (*mg_epoch_callback)(const mg_epoch_record* record, void* user);

/* Trains on train_ds. For MG_TASK_CYCLEGAN the pairing is destroyed first
 * (seed-deterministic shuffle of the mask pool). Writes periodic and final
 * checkpoints under out_dir unless it is NULL/empty. */
MG_API mg_status mg_train(const mg_train_config* cfg, const mg_dataset* train_ds, const char* out_dir,
                          mg_epoch_callback on_epoch, void* user, mg_checkpoint** out);

/* ---- checkpoints ------------------------------------------------------ */

MG_API mg_status mg_checkpoint_load(const char* path, mg_checkpoint** out);
MG_API mg_status mg_checkpoint_save(const mg_checkpoint* ck, const char* path);
MG_API mg_task mg_checkpoint_task(const mg_checkpoint* ck);
MG_API int mg_checkpoint_image_size(const mg_checkpoint* ck);
MG_API void mg_checkpoint_split(const mg_checkpoint* ck, int* n_train, int* n_test, uint64_t* seed);
MG_API int mg_checkpoint_epochs(const mg_checkpoint* ck);
MG_API mg_status mg_checkpoint_history(const mg_checkpoint* ck, int index, mg_epoch_record* out);
/* Standard deviation of the per-epoch losses over the trailing window. */
MG_API mg_status mg_checkpoint_stability(const mg_checkpoint* ck, int window, double* g_stddev,
                                         double* d_stddev);
MG_API void mg_checkpoint_free(mg_checkpoint* ck);

/* ---- evaluation and inference ---------------------------------------- */

typedef struct mg_sample_metrics {
    double iou;
    double dice;
    double accuracy;
} mg_sample_metrics;

/* Runs the image->mask generator on every sample, binarizes at `threshold`
 * (tanh space) and scores against the ground truth. per_sample may be NULL
 * or an array of mg_dataset_size(test_ds) entries. When triptych_dir is
 * non-NULL, writes one figure per sample: input | ground truth | prediction. */
MG_API mg_status mg_evaluate(const mg_checkpoint* ck, const mg_dataset* test_ds, float threshold,
                             const char* triptych_dir, mg_sample_metrics* per_sample,
                             mg_sample_metrics* mean_out);

/* CycleGAN reverse direction: mask -> image generations, one PNG per sample.
 * Fails with MG_ERR_TASK_MISMATCH on CGAN checkpoints. */
MG_API mg_status mg_generate_b2a(const mg_checkpoint* ck, const mg_dataset* test_ds,
                                 const char* out_dir);

/* Single-file inference. The image is resampled to the model size for the
 * forward pass, and the output is resized back to the input dimensions.
 * raw=0 writes the binarized mask; raw=1 writes the linear tanh map.
 * MG_DIR_B2A (CycleGAN only) reads the input as a mask and writes the
 * generated image, ignoring raw/threshold. */
MG_API mg_status mg_infer_file(const mg_checkpoint* ck, const char* image_path, const char* out_path,
                               int raw, mg_direction direction, float threshold);

#ifdef __cplusplus
}
#endif

#endif /* MASKGAN_H */
