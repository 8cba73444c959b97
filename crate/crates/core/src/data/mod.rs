//! MNIST ingestion, Fourier-domain preprocessing, batching and the spiral
//! trajectory task.

mod batches;
mod fourier;
mod idx;
mod pipeline;
mod trajectory;

pub use batches::{make_batches, shuffled_indices};
pub use fourier::{crop_start, fftshift, fourier_crop, Encoding, Fft2, PreprocessConfig, Preprocessor};
pub use idx::{
    load_mnist, load_mnist_split, mnist_paths, parse_images, parse_labels, ImageDataset, Split, IMAGE_MAGIC,
    IMAGE_SIDE, LABEL_MAGIC,
};
pub use pipeline::{dpu_input_pipeline, DPU_PAD_BEFORE, DPU_SAMPLES};
pub use trajectory::{spiral_reference, uniform_times, TrajectoryTask, SPIRAL_SAMPLES, SPIRAL_SPAN, SPIRAL_START};
